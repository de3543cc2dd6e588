#include <cmath>
#include <random>

#include "doctest.h"

#include "fastqa/wiq.hpp"

using namespace fastqa;
using namespace fastqa::ad;

TEST_CASE("binary wiq: surface matches exact strings only") {
  std::vector<std::string> ctx = {"The", "city", "of", "Karlsruhe", "."};
  std::vector<std::string> q = {"Which", "city", "?", "the"};
  auto surf = compute_wiq_binary(ctx, q, WiqPolicy::kSurface);
  CHECK(surf == std::vector<float>{0, 1, 0, 0, 0});  // "The" != "the"

  // normalized: both sides lowercased, question stopwords and punctuation out
  auto norm = compute_wiq_binary(ctx, q, WiqPolicy::kNormalized);
  CHECK(norm == std::vector<float>{0, 1, 0, 0, 0});  // "the" dropped as a stopword

  std::vector<std::string> q2 = {"KARLSRUHE"};
  CHECK(compute_wiq_binary(ctx, q2, WiqPolicy::kSurface) == std::vector<float>{0, 0, 0, 0, 0});
  CHECK(compute_wiq_binary(ctx, q2, WiqPolicy::kNormalized) ==
        std::vector<float>{0, 0, 0, 1, 0});
}

TEST_CASE("weighted wiq sums one softmax distribution per question word") {
  std::mt19937_64 rng(5);
  const int64_t L = 7, Q = 3, n = 4;
  Graph64 g;
  Var ctx = g.constant(uniform<double>({L, n}, rng, -1, 1));
  Var q = g.constant(uniform<double>({Q, n}, rng, -1, 1));
  Var v = g.constant(uniform<double>({n}, rng, -1, 1));
  const auto& w = g.value(compute_wiq_weighted(g, ctx, q, v));
  REQUIRE(w.shape == Shape{L});
  double total = 0;
  for (double x : w.data) {
    CHECK(x >= 0.0);
    total += x;
  }
  CHECK(total == doctest::Approx(double(Q)).epsilon(1e-12));
}

TEST_CASE("term-frequency closed form equals the softmax pipeline") {
  std::mt19937_64 rng(17);
  std::vector<std::string> pool;
  for (int i = 0; i < 12; ++i) pool.push_back("tok" + std::to_string(i));

  for (int trial = 0; trial < 100; ++trial) {
    int64_t L = 4 + int64_t(rng() % 30);
    std::vector<std::string> ctx;
    for (int64_t i = 0; i < L; ++i) ctx.push_back(pool[rng() % pool.size()]);
    // the degenerate-row caveat: question tokens must occur in the context
    int64_t Q = 1 + int64_t(rng() % 5);
    std::vector<std::string> q;
    for (int64_t i = 0; i < Q; ++i) q.push_back(ctx[rng() % ctx.size()]);

    auto closed = tf_wiq_oracle(ctx, q);
    auto pipeline = tf_wiq_softmax_pipeline(ctx, q);
    REQUIRE(closed.size() == size_t(L));
    REQUIRE(pipeline.size() == size_t(L));
    for (size_t j = 0; j < closed.size(); ++j) {
      INFO("trial ", trial, " position ", j);
      CHECK(std::abs(closed[j] - pipeline[j]) <= 1e-9);
    }
  }
}

TEST_CASE("term-frequency oracle on a hand case") {
  // ctx: a b a c; q: a a b
  std::vector<std::string> ctx = {"a", "b", "a", "c"};
  std::vector<std::string> q = {"a", "a", "b"};
  auto tf = tf_wiq_oracle(ctx, q);
  // tf(a|Q)=2, tf(a|C)=2 -> 1 at both a positions; tf(b|Q)=1, tf(b|C)=1 -> 1; c -> 0
  REQUIRE(tf.size() == 4);
  CHECK(tf[0] == doctest::Approx(1.0));
  CHECK(tf[1] == doctest::Approx(1.0));
  CHECK(tf[2] == doctest::Approx(1.0));
  CHECK(tf[3] == doctest::Approx(0.0));
}
