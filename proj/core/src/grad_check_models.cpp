#include <functional>
#include <random>

#include "fastqa/bow.hpp"
#include "fastqa/fastqa_model.hpp"
#include "fastqa/fusion.hpp"
#include "fastqa/grad_check.hpp"

namespace fastqa::ad {

namespace {

Tensor64 signed_uniform(Shape shape, std::mt19937_64& rng, double lo = 0.1, double hi = 1.0) {
  auto t = uniform<double>(std::move(shape), rng, lo, hi);
  std::bernoulli_distribution flip(0.5);
  for (auto& v : t.data)
    if (flip(rng)) v = -v;
  return t;
}

std::vector<float> random_wiq_b(int64_t len, std::mt19937_64& rng) {
  std::bernoulli_distribution hit(0.3);
  std::vector<float> out(len, 0.0f);
  for (auto& v : out) v = hit(rng) ? 1.0f : 0.0f;
  return out;
}

}  // namespace

// End-to-end checks: every loss below runs the full forward stack, so a
// single case covers dozens of op compositions the primitive battery cannot.
std::vector<GradCase> gradcheck_battery_models(uint64_t seed, int64_t model_n) {
  if (model_n < 2) throw Error("gradcheck: model n must be >= 2");
  std::mt19937_64 rng(mix_seed(seed, 7));
  std::vector<GradCase> cases;
  auto run = [&](const std::string& name, const std::function<Var(Graph64&)>& build,
                 const std::vector<Tensor64*>& leaves) {
    cases.push_back({name, grad_check(build, leaves)});
  };

  {
    const int64_t n = model_n, d = 5, L_X = 11, L_Q = 5;
    auto p = init_fastqa<double>(n, d, mix_seed(seed, 100));
    auto ctx = signed_uniform({L_X, d}, rng);
    auto q = signed_uniform({L_Q, d}, rng);
    auto wiq_b = random_wiq_b(L_X, rng);
    run(
        "model: fastqa span loss",
        [&, wiq_b](Graph64& g) {
          auto enc = encode_example(g, p, g.constant(ctx), g.constant(q), wiq_b);
          return span_loss(g, p, enc.ctx_H, enc.z_tilde, {{3, 5}});
        },
        p.trainable());
    run(
        "model: fastqa marginal loss, two golds",
        [&, wiq_b](Graph64& g) {
          auto enc = encode_example(g, p, g.constant(ctx), g.constant(q), wiq_b);
          return span_loss(g, p, enc.ctx_H, enc.z_tilde, {{3, 5}, {8, 9}}, true);
        },
        p.trainable());
  }

  {
    const int64_t n = model_n, L_X = 8, L_Q = 4;
    auto fp = init_fusion<double>(n, mix_seed(seed, 101));
    auto H = signed_uniform({L_X, n}, rng);
    auto Z = signed_uniform({L_Q, n}, rng);
    auto probe = signed_uniform({L_X, n}, rng, 0.2, 1.0);
    auto leaves = fp.trainable();
    Tensor64 Ht = H, Zt = Z;
    leaves.push_back(&Ht);
    leaves.push_back(&Zt);
    run(
        "model: fusion stack",
        [&](Graph64& g) {
          Var out = fusion_stack(g, fp, g.param(Ht), g.param(Zt));
          return g.sum(g.mul(out, g.constant(probe)));
        },
        leaves);
  }

  {
    const int64_t n = model_n, d = 5, L_X = 9, L_Q = 4;
    auto p = init_fastqa<double>(n, d, mix_seed(seed, 102));
    auto fp = init_fusion<double>(n, mix_seed(seed, 103));
    auto ctx = signed_uniform({L_X, d}, rng);
    auto q = signed_uniform({L_Q, d}, rng);
    auto wiq_b = random_wiq_b(L_X, rng);
    auto leaves = p.trainable();
    for (auto* t : fp.trainable()) leaves.push_back(t);
    run(
        "model: fastqaext span loss",
        [&, wiq_b](Graph64& g) {
          auto enc = encode_example(g, p, g.constant(ctx), g.constant(q), wiq_b);
          Var fused = fusion_stack(g, fp, enc.ctx_H, enc.q_Z);
          return span_loss(g, p, fused, enc.z_tilde, {{2, 4}});
        },
        leaves);
  }

  {
    const int64_t n = model_n + 2, d = 6, L_X = 12, L_Q = 4;
    auto p = init_bow<double>(n, d, mix_seed(seed, 104));
    auto ctx = signed_uniform({L_X, d}, rng);
    auto q = signed_uniform({L_Q, d}, rng);
    auto wiq_b = random_wiq_b(L_X, rng);
    LatSpan lat{1, 2, LatKind::kAfterWhatWhich};
    auto spans = enumerate_spans(L_X);
    run(
        "model: bow span loss",
        [&, wiq_b, spans](Graph64& g) {
          auto scores = bow_span_scores(g, p, g.constant(ctx), g.constant(q), wiq_b, lat, spans);
          return bow_loss<double>(g, scores.total, {5});
        },
        p.trainable());
    run(
        "model: bow marginal loss, two golds",
        [&, wiq_b, spans](Graph64& g) {
          auto scores = bow_span_scores(g, p, g.constant(ctx), g.constant(q), wiq_b, lat, spans);
          return bow_loss<double>(g, scores.total, {5, 40});
        },
        p.trainable());
  }

  return cases;
}

}  // namespace fastqa::ad
