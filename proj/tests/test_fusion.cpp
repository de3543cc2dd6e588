#include <cmath>
#include <random>

#include "doctest.h"

#include "fastqa/fusion.hpp"

using namespace fastqa;
using namespace fastqa::ad;

namespace {

template <typename T>
void zero_gates(FusionParamsT<T>& p) {
  for (auto* gate : {&p.intra, &p.bw, &p.fw, &p.inter, &p.inter_bw, &p.inter_fw}) {
    std::fill(gate->w.data.begin(), gate->w.data.end(), T(0));
    std::fill(gate->b.data.begin(), gate->b.data.end(), T(0));
  }
}

}  // namespace

TEST_CASE("fuse with a zeroed gate is an even mix") {
  auto p = init_fusion<double>(3, 1);
  zero_gates(p);
  Graph64 g;
  Var a = g.constant(Tensor64({2, 3}, {1, 2, 3, 4, 5, 6}));
  Var b = g.constant(Tensor64({2, 3}, {7, 8, 9, 10, 11, 12}));
  const auto& out = g.value(fuse(g, p.intra, a, b));
  for (size_t i = 0; i < 6; ++i)
    CHECK(out.data[i] == doctest::Approx(0.5 * (g.value(a).data[i] + g.value(b).data[i]))
                             .epsilon(1e-12));
}

TEST_CASE("saturated gates turn the whole stack into a float-exact identity") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    int64_t n = 2 + int64_t(rng() % 5);
    int64_t L = 2 + int64_t(rng() % 8);
    int64_t Q = 1 + int64_t(rng() % 4);
    auto p = init_fusion<float>(n, 1000 + uint64_t(trial));
    saturate_fusion_gates(p, 30.0f);

    Graph32 g;
    Tensor32 Ht = uniform<float>({L, n}, rng, -2, 2);
    Var H = g.constant(Ht);
    Var Z = g.constant(uniform<float>({Q, n}, rng, -2, 2));
    for (bool mask_self : {false, true}) {
      const auto& out = g.value(fusion_stack(g, p, H, Z, mask_self));
      REQUIRE(out.shape == Shape{L, n});
      for (size_t i = 0; i < Ht.data.size(); ++i) {
        INFO("trial ", trial, " mask_self ", mask_self, " i ", i);
        CHECK(out.data[i] == Ht.data[i]);  // bitwise
      }
    }
  }
}

TEST_CASE("intra fusion co-states follow the associative softmax") {
  // two rows, v_beta all ones, zeroed gates: everything is hand computable
  auto p = init_fusion<double>(2, 3);
  zero_gates(p);
  std::fill(p.v_beta.data.begin(), p.v_beta.data.end(), 1.0);
  Tensor64 Ht({2, 2}, {1.0, 0.5, -0.25, 2.0});
  const double dot = 1.0 * -0.25 + 0.5 * 2.0;  // h0 . h1

  Graph64 g;
  Var H = g.constant(Ht);

  // self scores count with weight exp(0) when not masked
  {
    const auto& out = g.value(intra_fuse(g, p, H, false));
    // row 0: co = (h0 + e^dot h1) / (1 + e^dot); out = (h0 + co) / 2
    for (int c = 0; c < 2; ++c) {
      double co = (Ht.data[size_t(c)] + std::exp(dot) * Ht.data[size_t(2 + c)]) /
                  (1.0 + std::exp(dot));
      CHECK(out.data[size_t(c)] ==
            doctest::Approx(0.5 * (Ht.data[size_t(c)] + co)).epsilon(1e-12));
    }
  }

  // masked: the only remaining neighbour is the co-state itself
  {
    const auto& out = g.value(intra_fuse(g, p, H, true));
    for (int c = 0; c < 2; ++c) {
      CHECK(out.data[size_t(c)] ==
            doctest::Approx(0.5 * (Ht.data[size_t(c)] + Ht.data[size_t(2 + c)])).epsilon(1e-12));
      CHECK(out.data[size_t(2 + c)] ==
            doctest::Approx(0.5 * (Ht.data[size_t(2 + c)] + Ht.data[size_t(c)])).epsilon(1e-12));
    }
  }
}

TEST_CASE("recurrent fusion sweeps backward then forward") {
  // zeroed gates: bw[j] = (h_j + bw[j+1]) / 2, fw[j] = (bw[j] + fw[j-1]) / 2
  auto p = init_fusion<double>(1, 9);
  zero_gates(p);
  Tensor64 Ht({3, 1}, {1.0, 2.0, 4.0});
  Graph64 g;
  const auto& out = g.value(recurrent_fuse(g, p.bw, p.fw, g.constant(Ht)));
  double bw2 = 4.0, bw1 = (2.0 + bw2) / 2, bw0 = (1.0 + bw1) / 2;
  double fw0 = bw0, fw1 = (bw1 + fw0) / 2, fw2 = (bw2 + fw1) / 2;
  CHECK(out.data[0] == doctest::Approx(fw0).epsilon(1e-12));
  CHECK(out.data[1] == doctest::Approx(fw1).epsilon(1e-12));
  CHECK(out.data[2] == doctest::Approx(fw2).epsilon(1e-12));
}

TEST_CASE("inter fusion keeps the context shape and reacts to the question") {
  std::mt19937_64 rng(15);
  auto p = init_fusion<double>(4, 21);
  Graph64 g;
  Var H = g.constant(uniform<double>({6, 4}, rng, -1, 1));
  Var Z1 = g.constant(uniform<double>({3, 4}, rng, -1, 1));
  Var Z2 = g.constant(uniform<double>({3, 4}, rng, -1, 1));
  const auto& a = g.value(inter_fuse(g, p, H, Z1));
  REQUIRE(a.shape == Shape{6, 4});
  const auto& b = g.value(inter_fuse(g, p, H, Z2));
  bool differs = false;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] != b.data[i]) differs = true;
  CHECK(differs);
}
