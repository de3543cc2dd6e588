#include <cmath>
#include <random>

#include "doctest.h"

#include "fastqa/fastqa_model.hpp"

using namespace fastqa;
using namespace fastqa::ad;

namespace {

struct Encoded {
  Graph64 g;
  FastQAParamsT<double> p;
  EncodedPair enc;
  int64_t L;

  Encoded(int64_t L_, int64_t Q, int64_t n, int64_t d, uint64_t seed,
          const FastQAOptions& opts = {}, std::vector<float> wiq_b = {})
      : p(init_fastqa<double>(n, d, seed)), L(L_) {
    std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
    Var ctx = g.constant(uniform<double>({L, d}, rng, -1, 1));
    Var q = g.constant(uniform<double>({Q, d}, rng, -1, 1));
    if (wiq_b.empty()) {
      wiq_b.resize(size_t(L), 0.0f);
      for (auto& v : wiq_b) v = float(rng() % 2);
    }
    enc = encode_example(g, p, ctx, q, wiq_b, opts);
  }
};

}  // namespace

TEST_CASE("encoder output shapes") {
  Encoded m(9, 4, 5, 3, 7);
  CHECK(m.g.value(m.enc.ctx_H).shape == Shape{9, 5});
  CHECK(m.g.value(m.enc.q_Z).shape == Shape{4, 5});
  CHECK(m.g.value(m.enc.z_tilde).shape == Shape{5});
}

TEST_CASE("start distribution normalizes; ends before the start get probability zero") {
  Encoded m(8, 3, 5, 3, 13);
  Var ps = m.g.softmax(start_logits(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde), 0);
  const std::vector<double> psv = m.g.value(ps).data;
  double acc = 0;
  for (double v : psv) acc += v;
  CHECK(acc == doctest::Approx(1.0).epsilon(1e-9));

  const int64_t s = 4;
  Var pe = m.g.softmax(end_logits(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde, s), 0);
  const std::vector<double> pev = m.g.value(pe).data;
  double tail = 0;
  for (int64_t j = 0; j < 8; ++j) {
    if (j < s) CHECK(pev[size_t(j)] == 0.0);
    tail += pev[size_t(j)];
  }
  CHECK(tail == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("beam search with k = L equals the exhaustive argmax; k = 1 is greedy") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed * 31 + 5);
    int64_t L = 3 + int64_t(rng() % 10);
    Encoded m(L, 2 + int64_t(rng() % 4), 5, 3, seed + 100);

    // oracle: best (s, e) over every legal pair, smaller s then e on ties
    Var ps = m.g.softmax(start_logits(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde), 0);
    const std::vector<double> psv = m.g.value(ps).data;
    double best_prob = -1;
    int64_t best_s = 0, best_e = 0;
    for (int64_t s = 0; s < L; ++s) {
      Var pe = m.g.softmax(end_logits(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde, s), 0);
      const std::vector<double> pev = m.g.value(pe).data;
      for (int64_t e = s; e < L; ++e) {
        double prob = psv[size_t(s)] * pev[size_t(e)];
        if (prob > best_prob) {
          best_prob = prob;
          best_s = s;
          best_e = e;
        }
      }
    }

    auto full = beam_search_decode(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde, L);
    REQUIRE(full.size() == size_t(L));
    INFO("seed ", seed, " L ", L);
    CHECK(full[0].probability == best_prob);
    CHECK(full[0].s == best_s);
    CHECK(full[0].e == best_e);
    for (size_t i = 1; i < full.size(); ++i)
      CHECK(full[i - 1].probability >= full[i].probability);

    // greedy: most probable start, then its best end
    auto one = beam_search_decode(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde, 1);
    REQUIRE(one.size() == 1);
    int64_t gs = 0;
    for (int64_t s = 1; s < L; ++s)
      if (psv[size_t(s)] > psv[size_t(gs)]) gs = s;
    CHECK(one[0].s == gs);

    // widening the beam never hurts the best probability
    double prev = 0;
    for (int64_t k = 1; k <= L; ++k) {
      auto cand = beam_search_decode(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde, k);
      CHECK(cand[0].probability >= prev);
      prev = cand[0].probability;
    }
    // k past L clamps
    auto over = beam_search_decode(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde, L + 50);
    CHECK(over.size() == size_t(L));
  }
}

TEST_CASE("span loss equals the negative log joint of the gold") {
  Encoded m(7, 3, 5, 3, 200);
  Span gold{2, 4};
  Var loss = span_loss(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde, {gold});

  Var ps = m.g.softmax(start_logits(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde), 0);
  const std::vector<double> psv = m.g.value(ps).data;
  Var pe = m.g.softmax(end_logits(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde, gold.start), 0);
  const std::vector<double> pev = m.g.value(pe).data;
  double direct = -std::log(psv[size_t(gold.start)]) - std::log(pev[size_t(gold.end)]);
  CHECK(m.g.value(loss).scalar() == doctest::Approx(direct).epsilon(1e-10));

  // two golds: min-loss picks the cheaper one, the marginal is cheaper still
  Span worse{0, 0};
  Var min_loss = span_loss(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde, {gold, worse});
  Var other = span_loss(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde, {worse});
  double want_min = std::min(m.g.value(loss).scalar(), m.g.value(other).scalar());
  CHECK(m.g.value(min_loss).scalar() == doctest::Approx(want_min).epsilon(1e-10));
  Var marginal = span_loss(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde, {gold, worse}, true);
  CHECK(m.g.value(marginal).scalar() < m.g.value(min_loss).scalar());

  CHECK_THROWS_AS(span_loss(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde, {}), Error);
  CHECK_THROWS_AS(span_loss(m.g, m.p, m.enc.ctx_H, m.enc.z_tilde, {{5, 9}}), Error);
}

TEST_CASE("disabling wiq makes the encoder ignore the binary feature") {
  FastQAOptions off;
  off.wiq_enabled = false;
  std::vector<float> zeros_b(6, 0.0f), ones_b(6, 1.0f);
  Encoded a(6, 3, 4, 3, 55, off, zeros_b);
  Encoded b(6, 3, 4, 3, 55, off, ones_b);
  const auto& ha = a.g.value(a.enc.ctx_H).data;
  const auto& hb = b.g.value(b.enc.ctx_H).data;
  REQUIRE(ha.size() == hb.size());
  for (size_t i = 0; i < ha.size(); ++i) CHECK(ha[i] == hb[i]);

  // with wiq on, the same flip moves the encoding
  Encoded c(6, 3, 4, 3, 55, {}, zeros_b);
  Encoded d(6, 3, 4, 3, 55, {}, ones_b);
  const auto& hc = c.g.value(c.enc.ctx_H).data;
  const auto& hd = d.g.value(d.enc.ctx_H).data;
  bool differs = false;
  for (size_t i = 0; i < hc.size(); ++i)
    if (hc[i] != hd[i]) differs = true;
  CHECK(differs);
}
