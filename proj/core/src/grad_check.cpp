#include "fastqa/grad_check.hpp"

#include <cmath>
#include <random>

namespace fastqa::ad {

GradCheckResult grad_check(const std::function<Var(Graph64&)>& build,
                           const std::vector<Tensor64*>& leaves, double eps) {
  for (auto* leaf : leaves) {
    leaf->requires_grad = true;
    leaf->zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Graph64 g;
    Var loss = build(g);
    g.backward(loss);
    for (auto* leaf : leaves) {
      leaf->ensure_grad();
      analytic.push_back(leaf->grad);
    }
  }
  auto eval = [&]() {
    Graph64 g;
    g.set_check_finite(false);  // perturbed losses only need values
    return g.value(build(g)).scalar();
  };

  GradCheckResult res;
  for (size_t li = 0; li < leaves.size(); ++li) {
    Tensor64& t = *leaves[li];
    for (size_t i = 0; i < t.data.size(); ++i) {
      double saved = t.data[i];
      t.data[i] = saved + eps;
      double up = eval();
      t.data[i] = saved - eps;
      double down = eval();
      t.data[i] = saved;
      double numeric = (up - down) / (2.0 * eps);
      double a = analytic[li][i];
      double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
      ++res.checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = "leaf " + std::to_string(li) + " [" + std::to_string(i) +
                    "] analytic=" + std::to_string(a) + " numeric=" + std::to_string(numeric);
      }
    }
  }
  return res;
}

namespace {

// uniform values bounded away from zero, so relu kinks and log domains stay
// clear of the finite-difference step
Tensor64 signed_uniform(Shape shape, std::mt19937_64& rng, double lo = 0.1, double hi = 1.0) {
  auto t = uniform<double>(std::move(shape), rng, lo, hi);
  std::bernoulli_distribution flip(0.5);
  for (auto& v : t.data)
    if (flip(rng)) v = -v;
  return t;
}

Tensor64 positive_uniform(Shape shape, std::mt19937_64& rng, double lo = 0.2, double hi = 2.0) {
  return uniform<double>(std::move(shape), rng, lo, hi);
}

using Builder = std::function<Var(Graph64&)>;

// reduce an op output to a scalar against fixed random weights, so every
// output element carries a distinct gradient signal
struct Probe {
  Tensor64 w;
  Var operator()(Graph64& g, Var out) {
    if (g.value(out).numel() == 1 && g.value(out).rank() == 1) return out;
    Var wv = g.constant(w);
    return g.sum(g.mul(out, wv));
  }
};

Probe make_probe(const Shape& shape, std::mt19937_64& rng) {
  return Probe{signed_uniform(shape, rng, 0.2, 1.0)};
}

}  // namespace

std::vector<GradCase> gradcheck_battery_ops(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradCase> cases;
  auto run = [&](const std::string& name, const Builder& build, std::vector<Tensor64*> leaves) {
    cases.push_back({name, grad_check(build, leaves)});
  };

  {
    auto a = signed_uniform({4, 3}, rng);
    auto b = signed_uniform({3, 5}, rng);
    auto p = make_probe({4, 5}, rng);
    run("matmul", [&](Graph64& g) { return p(g, g.matmul(g.param(a), g.param(b))); }, {&a, &b});
  }
  {
    auto a = signed_uniform({4, 3}, rng);
    auto v = signed_uniform({3}, rng);
    auto p = make_probe({4}, rng);
    run("matmul_vec", [&](Graph64& g) { return p(g, g.matmul(g.param(a), g.param(v))); }, {&a, &v});
  }
  {
    auto x = signed_uniform({4, 3}, rng);
    auto w = signed_uniform({5, 3}, rng);
    auto b = signed_uniform({5}, rng);
    auto p = make_probe({4, 5}, rng);
    run("linear",
        [&](Graph64& g) { return p(g, g.linear(g.param(x), g.param(w), g.param(b))); },
        {&x, &w, &b});
  }
  {
    auto x = signed_uniform({3}, rng);
    auto w = signed_uniform({5, 3}, rng);
    auto p = make_probe({5}, rng);
    run("linear_vec_nobias",
        [&](Graph64& g) { return p(g, g.linear(g.param(x), g.param(w))); }, {&x, &w});
  }
  {
    auto a = signed_uniform({4, 3}, rng);
    auto p = make_probe({3, 4}, rng);
    run("transpose", [&](Graph64& g) { return p(g, g.transpose(g.param(a))); }, {&a});
  }
  {
    auto a = signed_uniform({2, 4, 3}, rng);
    auto b = signed_uniform({4, 3}, rng);
    auto p = make_probe({2, 4, 3}, rng);
    run("add_broadcast", [&](Graph64& g) { return p(g, g.add(g.param(a), g.param(b))); }, {&a, &b});
  }
  {
    auto a = signed_uniform({4, 3}, rng);
    auto b = signed_uniform({4, 3}, rng);
    auto p = make_probe({4, 3}, rng);
    run("elementwise_mul", [&](Graph64& g) { return p(g, g.mul(g.param(a), g.param(b))); }, {&a, &b});
  }
  {
    auto a = signed_uniform({4, 3}, rng);
    auto p = make_probe({4, 3}, rng);
    run("affine", [&](Graph64& g) { return p(g, g.affine(g.param(a), 1.7, -0.3)); }, {&a});
  }
  {
    auto a = signed_uniform({2, 3}, rng);
    auto b = signed_uniform({4, 3}, rng);
    auto c = signed_uniform({1, 3}, rng);
    auto p = make_probe({7, 3}, rng);
    run("concat_axis0",
        [&](Graph64& g) {
          return p(g, g.concat({g.param(a), g.param(b), g.param(c)}, 0));
        },
        {&a, &b, &c});
  }
  {
    auto a = signed_uniform({3, 2}, rng);
    auto b = signed_uniform({3, 4}, rng);
    auto p = make_probe({3, 6}, rng);
    run("concat_axis1",
        [&](Graph64& g) { return p(g, g.concat({g.param(a), g.param(b)}, 1)); }, {&a, &b});
  }
  {
    auto a = signed_uniform({6, 3}, rng);
    auto p = make_probe({3, 3}, rng);
    run("slice_axis0", [&](Graph64& g) { return p(g, g.slice(g.param(a), 0, 2, 5)); }, {&a});
  }
  {
    auto a = signed_uniform({3, 6}, rng);
    auto p = make_probe({3, 2}, rng);
    run("slice_axis1", [&](Graph64& g) { return p(g, g.slice(g.param(a), 1, 1, 3)); }, {&a});
  }
  {
    auto a = signed_uniform({4, 3}, rng);
    auto p = make_probe({12}, rng);
    run("reshape", [&](Graph64& g) { return p(g, g.reshape(g.param(a), {12})); }, {&a});
  }
  {
    auto a = signed_uniform({4, 3}, rng);
    auto pt = make_probe({4, 3}, rng);
    run("tanh", [&](Graph64& g) { return pt(g, g.tanh(g.param(a))); }, {&a});
    auto ps = make_probe({4, 3}, rng);
    run("sigmoid", [&](Graph64& g) { return ps(g, g.sigmoid(g.param(a))); }, {&a});
    auto pr = make_probe({4, 3}, rng);
    run("relu", [&](Graph64& g) { return pr(g, g.relu(g.param(a))); }, {&a});
    auto pe = make_probe({4, 3}, rng);
    run("exp", [&](Graph64& g) { return pe(g, g.exp(g.param(a))); }, {&a});
  }
  {
    auto a = positive_uniform({4, 3}, rng);
    auto p = make_probe({4, 3}, rng);
    run("log", [&](Graph64& g) { return p(g, g.log(g.param(a))); }, {&a});
  }
  {
    auto a = signed_uniform({4, 5}, rng);
    auto p0 = make_probe({4, 5}, rng);
    run("softmax_axis0", [&](Graph64& g) { return p0(g, g.softmax(g.param(a), 0)); }, {&a});
    auto p1 = make_probe({4, 5}, rng);
    run("softmax_axis1", [&](Graph64& g) { return p1(g, g.softmax(g.param(a), 1)); }, {&a});
  }
  {
    auto a = signed_uniform({3, 5}, rng);
    Tensor64 m = zeros<double>({3, 5});
    for (int64_t r = 0; r < 3; ++r)
      for (int64_t c = 3 + r % 2; c < 5; ++c) m.data[static_cast<size_t>(r * 5 + c)] = -1e30;
    auto p = make_probe({3, 5}, rng);
    run("softmax_masked",
        [&](Graph64& g) { return p(g, g.softmax(g.param(a), 1, g.constant(m))); }, {&a});
  }
  {
    auto a = signed_uniform({7}, rng);
    run("logsumexp", [&](Graph64& g) { return g.logsumexp(g.param(a)); }, {&a});
  }
  {
    auto a = signed_uniform({4, 3}, rng);
    run("sum_all", [&](Graph64& g) { return g.sum(g.param(a)); }, {&a});
    auto p0 = make_probe({3}, rng);
    run("sum_axis0", [&](Graph64& g) { return p0(g, g.sum(g.param(a), 0)); }, {&a});
    auto p1 = make_probe({4}, rng);
    run("sum_axis1", [&](Graph64& g) { return p1(g, g.sum(g.param(a), 1)); }, {&a});
  }
  {
    auto a = signed_uniform({4, 3}, rng);
    Tensor64 m = zeros<double>({4, 3});
    for (int64_t i = 0; i < 12; ++i) m.data[static_cast<size_t>(i)] = (i % 3 != 2) ? 1.0 : 0.0;
    auto p = make_probe({3}, rng);
    run("sum_masked",
        [&](Graph64& g) { return p(g, g.sum(g.param(a), 0, g.constant(m))); }, {&a});
    run("mean_all", [&](Graph64& g) { return g.mean(g.param(a)); }, {&a});
    auto p1 = make_probe({4}, rng);
    run("mean_axis1", [&](Graph64& g) { return p1(g, g.mean(g.param(a), 1)); }, {&a});
    auto p2 = make_probe({3}, rng);
    run("mean_masked",
        [&](Graph64& g) { return p2(g, g.mean(g.param(a), 0, g.constant(m))); }, {&a});
  }
  {
    // distinct column values keep the argmax stable under perturbation
    Tensor64 a = zeros<double>({5, 3});
    std::uniform_real_distribution<double> jitter(-0.04, 0.04);
    for (int64_t t = 0; t < 5; ++t)
      for (int64_t c = 0; c < 3; ++c)
        a.data[static_cast<size_t>(t * 3 + c)] = 0.3 * static_cast<double>((t * 7 + c * 3) % 5) + jitter(rng);
    auto p = make_probe({3}, rng);
    run("max_over_time", [&](Graph64& g) { return p(g, g.max_over_time(g.param(a))); }, {&a});
  }
  {
    auto table = signed_uniform({6, 4}, rng);
    auto p = make_probe({5, 4}, rng);
    run("embedding_lookup",
        [&](Graph64& g) { return p(g, g.embedding_lookup(g.param(table), {1, 3, 1, 0, 5})); },
        {&table});
  }
  {
    auto x = signed_uniform({7, 3}, rng);
    auto k = signed_uniform({3, 4, 5}, rng);
    auto b = signed_uniform({4}, rng);
    auto p = make_probe({7, 4}, rng);
    run("conv1d",
        [&](Graph64& g) { return p(g, g.conv1d_same(g.param(x), g.param(k), g.param(b))); },
        {&x, &k, &b});
  }
  {
    auto x = signed_uniform({4, 3}, rng);
    Tensor64 m = zeros<double>({4, 3});
    for (int64_t i = 0; i < 12; ++i) m.data[static_cast<size_t>(i)] = (i % 4 == 1) ? 0.0 : 1.25;
    auto p = make_probe({4, 3}, rng);
    run("dropout", [&](Graph64& g) { return p(g, g.dropout(g.param(x), m)); }, {&x});
  }
  for (bool reverse : {false, true}) {
    auto x = signed_uniform({6, 3}, rng);
    auto wx = signed_uniform({3, 8}, rng, 0.1, 0.5);
    auto wh = signed_uniform({2, 8}, rng, 0.1, 0.5);
    auto b = signed_uniform({8}, rng, 0.1, 0.5);
    auto p = make_probe({6, 2}, rng);
    std::string name = reverse ? "lstm_seq_reverse" : "lstm_seq";
    run(name,
        [&](Graph64& g) {
          return p(g, g.lstm_seq(g.param(x), g.param(wx), g.param(wh), g.param(b), 2, reverse));
        },
        {&x, &wx, &wh, &b});
    auto pl = make_probe({6, 2}, rng);
    run(name + "_length",
        [&](Graph64& g) {
          return pl(g, g.lstm_seq(g.param(x), g.param(wx), g.param(wh), g.param(b), 2, reverse, 4));
        },
        {&x, &wx, &wh, &b});
  }
  {
    auto v = signed_uniform({4}, rng);
    auto p = make_probe({3, 4}, rng);
    run("tile_rows", [&](Graph64& g) { return p(g, g.tile_rows(g.param(v), 3)); }, {&v});
  }
  {
    auto x = signed_uniform({6}, rng);
    auto p = make_probe({4}, rng);
    run("gather", [&](Graph64& g) { return p(g, g.gather(g.param(x), {5, 0, 2, 0})); }, {&x});
  }
  {
    auto e = signed_uniform({9, 3}, rng);
    std::vector<Span> spans = {{0, 0}, {2, 4}, {7, 8}, {3, 3}};
    auto p = make_probe({4, 15}, rng);
    run("span_features",
        [&](Graph64& g) { return p(g, g.span_features(g.param(e), spans)); }, {&e});
  }
  {
    auto v = signed_uniform({30}, rng);
    std::vector<Span> spans = {{0, 2}, {12, 14}, {27, 29}, {5, 5}};
    auto p = make_probe({4, 6}, rng);
    run("window_means",
        [&](Graph64& g) { return p(g, g.window_means(g.param(v), spans)); }, {&v});
  }
  return cases;
}

std::vector<GradCase> gradcheck_battery(uint64_t seed) {
  auto cases = gradcheck_battery_ops(seed);
  auto models = gradcheck_battery_models(seed);
  cases.insert(cases.end(), models.begin(), models.end());
  return cases;
}

}  // namespace fastqa::ad
