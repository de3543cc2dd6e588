#include "fastqa/fastqa_model.hpp"

#include <algorithm>
#include <random>

#include "fastqa/wiq.hpp"

namespace fastqa {

template <typename T>
std::vector<std::pair<std::string, TensorT<T>*>> FastQAParamsT<T>::named_params() {
  return {
      {"fastqa.P", &P},
      {"fastqa.hw_gate_w", &hw_gate_w},
      {"fastqa.hw_gate_b", &hw_gate_b},
      {"fastqa.hw_tr_w", &hw_tr_w},
      {"fastqa.hw_tr_b", &hw_tr_b},
      {"fastqa.v_wiq", &v_wiq},
      {"fastqa.lstm_fw_wx", &lstm_fw_wx},
      {"fastqa.lstm_fw_wh", &lstm_fw_wh},
      {"fastqa.lstm_fw_b", &lstm_fw_b},
      {"fastqa.lstm_bw_wx", &lstm_bw_wx},
      {"fastqa.lstm_bw_wh", &lstm_bw_wh},
      {"fastqa.lstm_bw_b", &lstm_bw_b},
      {"fastqa.B_ctx", &B_ctx},
      {"fastqa.B_q", &B_q},
      {"fastqa.v_q", &v_q},
      {"fastqa.start_w", &start_w},
      {"fastqa.start_b", &start_b},
      {"fastqa.v_s", &v_s},
      {"fastqa.end_w", &end_w},
      {"fastqa.end_b", &end_b},
      {"fastqa.v_e", &v_e},
  };
}

template <typename T>
std::vector<TensorT<T>*> FastQAParamsT<T>::trainable() {
  std::vector<TensorT<T>*> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

template <typename T>
template <typename U>
FastQAParamsT<U> FastQAParamsT<T>::cast() const {
  FastQAParamsT<U> o;
  o.n = n;
  o.d = d;
  auto self = const_cast<FastQAParamsT<T>*>(this);
  auto src = self->named_params();
  auto dst = o.named_params();
  for (size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<U>();
  return o;
}

namespace {

template <typename T>
TensorT<T> lstm_bias(int64_t h) {
  // gate order [i, f, z, o]; forget gates start open
  TensorT<T> b = zeros<T>({4 * h});
  for (int64_t j = 0; j < h; ++j) b.data[static_cast<size_t>(h + j)] = T(1);
  return b;
}

template <typename T>
TensorT<T> stacked_identity(int64_t n) {
  TensorT<T> b = zeros<T>({n, 2 * n});
  for (int64_t i = 0; i < n; ++i) {
    b.data[static_cast<size_t>(i * 2 * n + i)] = T(1);
    b.data[static_cast<size_t>(i * 2 * n + n + i)] = T(1);
  }
  return b;
}

}  // namespace

template <typename T>
FastQAParamsT<T> init_fastqa(int64_t n, int64_t d, uint64_t seed) {
  if (n <= 0 || d <= 0) throw Error("init_fastqa: n and d must be positive");
  FastQAParamsT<T> p;
  p.n = n;
  p.d = d;
  std::mt19937_64 rng(mix_seed(seed, 21));
  p.P = fan_in_uniform<T>({n, d}, d, rng);
  p.hw_gate_w = fan_in_uniform<T>({n, n}, n, rng);
  p.hw_gate_b = zeros<T>({n});
  p.hw_tr_w = fan_in_uniform<T>({n, n}, n, rng);
  p.hw_tr_b = zeros<T>({n});
  p.v_wiq = fan_in_uniform<T>({n}, n, rng);
  p.lstm_fw_wx = fan_in_uniform<T>({n + 2, 4 * n}, n + 2, rng);
  p.lstm_fw_wh = fan_in_uniform<T>({n, 4 * n}, n, rng);
  p.lstm_fw_b = lstm_bias<T>(n);
  p.lstm_bw_wx = fan_in_uniform<T>({n + 2, 4 * n}, n + 2, rng);
  p.lstm_bw_wh = fan_in_uniform<T>({n, 4 * n}, n, rng);
  p.lstm_bw_b = lstm_bias<T>(n);
  p.B_ctx = stacked_identity<T>(n);
  p.B_q = stacked_identity<T>(n);
  p.v_q = fan_in_uniform<T>({n}, n, rng);
  p.start_w = fan_in_uniform<T>({n, 3 * n}, 3 * n, rng);
  p.start_b = zeros<T>({n});
  p.v_s = fan_in_uniform<T>({n}, n, rng);
  p.end_w = fan_in_uniform<T>({n, 5 * n}, 5 * n, rng);
  p.end_b = zeros<T>({n});
  p.v_e = fan_in_uniform<T>({n}, n, rng);
  for (auto* t : p.trainable()) t->requires_grad = true;
  return p;
}

template <typename T>
ProjectedT<T> project_highway(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var emb) {
  const auto& e = g.value(emb);
  if (e.rank() != 2 || e.dim(1) != p.d) {
    throw Error("project_highway: embeddings " + shape_str(e.shape) + " vs d=" +
                std::to_string(p.d));
  }
  ad::Var xp = g.linear(emb, g.param(p.P));
  ad::Var gate = g.sigmoid(g.linear(xp, g.param(p.hw_gate_w), g.param(p.hw_gate_b)));
  ad::Var tr = g.tanh(g.linear(xp, g.param(p.hw_tr_w), g.param(p.hw_tr_b)));
  ad::Var mixed = g.add(g.mul(gate, xp), g.mul(g.one_minus(gate), tr));
  return {xp, mixed};
}

template <typename T>
ad::Var encode_sequence(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var mixed, ad::Var wiq_b,
                        ad::Var wiq_w, EncodePass pass) {
  const auto& m = g.value(mixed);
  if (m.rank() != 2 || m.dim(0) < 1) throw Error("encode_sequence: empty sequence");
  int64_t L = m.dim(0);
  ad::Var input = g.concat({mixed, g.reshape(wiq_b, {L, 1}), g.reshape(wiq_w, {L, 1})}, 1);
  ad::Var fw = g.lstm_seq(input, g.param(p.lstm_fw_wx), g.param(p.lstm_fw_wh),
                          g.param(p.lstm_fw_b), p.n, false);
  ad::Var bw = g.lstm_seq(input, g.param(p.lstm_bw_wx), g.param(p.lstm_bw_wh),
                          g.param(p.lstm_bw_b), p.n, true);
  ad::Var hprime = g.concat({fw, bw}, 1);
  ad::Var b = pass == EncodePass::kContext ? g.param(p.B_ctx) : g.param(p.B_q);
  return g.tanh(g.linear(hprime, b));
}

template <typename T>
ad::Var question_summary(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var Z) {
  const auto& z = g.value(Z);
  int64_t lq = z.dim(0);
  ad::Var scores = g.matmul(Z, g.param(p.v_q));       // (L_Q,)
  ad::Var alpha = g.softmax(scores, 0);               // (L_Q,)
  ad::Var pooled = g.matmul(g.reshape(alpha, {1, lq}), Z);  // (1, n)
  return g.reshape(pooled, {p.n});
}

template <typename T>
ad::Var start_logits(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var H, ad::Var z_tilde) {
  int64_t L = g.value(H).dim(0);
  ad::Var zt = g.tile_rows(z_tilde, L);
  ad::Var input = g.concat({H, zt, g.mul(H, zt)}, 1);  // (L, 3n)
  ad::Var hidden = g.relu(g.linear(input, g.param(p.start_w), g.param(p.start_b)));
  return g.matmul(hidden, g.param(p.v_s));  // (L,)
}

template <typename T>
ad::Var end_logits(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var H, ad::Var z_tilde,
                   int64_t start) {
  int64_t L = g.value(H).dim(0);
  if (start < 0 || start >= L) {
    throw Error("end_logits: start " + std::to_string(start) + " outside context of " +
                std::to_string(L));
  }
  ad::Var zt = g.tile_rows(z_tilde, L);
  ad::Var hs = g.tile_rows(g.row(H, start), L);
  ad::Var input = g.concat({H, hs, zt, g.mul(H, zt), g.mul(H, hs)}, 1);  // (L, 5n)
  ad::Var hidden = g.relu(g.linear(input, g.param(p.end_w), g.param(p.end_b)));
  ad::Var logits = g.matmul(hidden, g.param(p.v_e));
  TensorT<T> mask = zeros<T>({L});
  for (int64_t j = 0; j < start; ++j) mask.data[static_cast<size_t>(j)] = T(-1e30);
  return g.add(logits, g.constant(std::move(mask)));
}

template <typename T>
EncodedPair encode_example(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var ctx_emb, ad::Var q_emb,
                           const std::vector<float>& wiq_b, const FastQAOptions& opts) {
  int64_t lx = g.value(ctx_emb).dim(0);
  int64_t lq = g.value(q_emb).dim(0);
  if (static_cast<int64_t>(wiq_b.size()) != lx) {
    throw Error("encode_example: wiq_b length " + std::to_string(wiq_b.size()) +
                " vs context length " + std::to_string(lx));
  }
  auto ctx = project_highway(g, p, ctx_emb);
  auto q = project_highway(g, p, q_emb);

  ad::Var ctx_wiq_b, ctx_wiq_w;
  if (opts.wiq_enabled) {
    TensorT<T> b = zeros<T>({lx});
    for (int64_t j = 0; j < lx; ++j) b.data[static_cast<size_t>(j)] = static_cast<T>(wiq_b[static_cast<size_t>(j)]);
    ctx_wiq_b = g.constant(std::move(b));
    ctx_wiq_w = compute_wiq_weighted(g, ctx.projected, q.projected, g.param(p.v_wiq));
  } else {
    ctx_wiq_b = g.constant(zeros<T>({lx}));
    ctx_wiq_w = g.constant(zeros<T>({lx}));
  }
  ad::Var ones_q = g.constant(full<T>({lq}, T(1)));

  EncodedPair out;
  out.ctx_H = encode_sequence(g, p, ctx.mixed, ctx_wiq_b, ctx_wiq_w, EncodePass::kContext);
  out.q_Z = encode_sequence(g, p, q.mixed, ones_q, ones_q, EncodePass::kQuestion);
  out.z_tilde = question_summary(g, p, out.q_Z);
  return out;
}

template <typename T>
std::vector<AnswerPrediction> beam_search_decode(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var H,
                                                 ad::Var z_tilde, int64_t k) {
  if (k < 1) throw Error("beam_search_decode: k must be >= 1");
  int64_t L = g.value(H).dim(0);
  k = std::min(k, L);
  ad::Var ps = g.softmax(start_logits(g, p, H, z_tilde), 0);
  // copy: growing the graph below may reallocate node storage
  const std::vector<T> psv = g.value(ps).data;

  std::vector<int64_t> order(static_cast<size_t>(L));
  for (int64_t i = 0; i < L; ++i) order[static_cast<size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    if (psv[static_cast<size_t>(a)] != psv[static_cast<size_t>(b)]) {
      return psv[static_cast<size_t>(a)] > psv[static_cast<size_t>(b)];
    }
    return a < b;  // equal start probability: smaller index first
  });

  std::vector<AnswerPrediction> candidates;
  for (int64_t rank = 0; rank < k; ++rank) {
    int64_t s = order[static_cast<size_t>(rank)];
    ad::Var pe = g.softmax(end_logits(g, p, H, z_tilde, s), 0);
    const std::vector<T> pev = g.value(pe).data;
    int64_t best_e = s;
    for (int64_t j = s; j < L; ++j) {
      if (pev[static_cast<size_t>(j)] > pev[static_cast<size_t>(best_e)]) best_e = j;
    }
    AnswerPrediction pred;
    pred.s = s;
    pred.e = best_e;
    pred.probability = static_cast<double>(psv[static_cast<size_t>(s)]) *
                       static_cast<double>(pev[static_cast<size_t>(best_e)]);
    candidates.push_back(pred);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const AnswerPrediction& a, const AnswerPrediction& b) {
                     if (a.probability != b.probability) return a.probability > b.probability;
                     if (a.s != b.s) return a.s < b.s;
                     return a.e < b.e;
                   });
  return candidates;
}

template <typename T>
ad::Var span_loss(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var H, ad::Var z_tilde,
                  const std::vector<Span>& golds, bool marginal) {
  if (golds.empty()) throw Error("span_loss: no gold spans");
  int64_t L = g.value(H).dim(0);
  ad::Var s_logits = start_logits(g, p, H, z_tilde);
  ad::Var s_lse = g.logsumexp(s_logits);

  std::vector<ad::Var> logps;  // per gold: log p_s(s) + log p_e(e|s), shape (1,)
  for (const Span& gold : golds) {
    if (gold.start < 0 || gold.end < gold.start || gold.end >= L) {
      throw Error("span_loss: gold span outside context");
    }
    ad::Var e_logits = end_logits(g, p, H, z_tilde, gold.start);
    ad::Var e_lse = g.logsumexp(e_logits);
    ad::Var lp = g.sub(g.add(g.pick(s_logits, gold.start), g.pick(e_logits, gold.end)),
                       g.add(s_lse, e_lse));
    logps.push_back(lp);
  }
  if (logps.size() == 1) return g.scale(logps[0], T(-1));
  if (marginal) {
    // -log sum_g p(s_g, e_g)
    return g.scale(g.logsumexp(g.concat(logps, 0)), T(-1));
  }
  // min loss = most probable gold; values are already known in the eager graph
  size_t best = 0;
  for (size_t i = 1; i < logps.size(); ++i) {
    if (g.value(logps[i]).scalar() > g.value(logps[best]).scalar()) best = i;
  }
  return g.scale(logps[best], T(-1));
}

template struct FastQAParamsT<float>;
template struct FastQAParamsT<double>;
template FastQAParamsT<float> FastQAParamsT<float>::cast<float>() const;
template FastQAParamsT<double> FastQAParamsT<float>::cast<double>() const;
template FastQAParamsT<float> FastQAParamsT<double>::cast<float>() const;

template FastQAParamsT<float> init_fastqa<float>(int64_t, int64_t, uint64_t);
template FastQAParamsT<double> init_fastqa<double>(int64_t, int64_t, uint64_t);
template ProjectedT<float> project_highway<float>(ad::Graph32&, FastQAParamsT<float>&, ad::Var);
template ProjectedT<double> project_highway<double>(ad::Graph64&, FastQAParamsT<double>&, ad::Var);
template ad::Var encode_sequence<float>(ad::Graph32&, FastQAParamsT<float>&, ad::Var, ad::Var,
                                        ad::Var, EncodePass);
template ad::Var encode_sequence<double>(ad::Graph64&, FastQAParamsT<double>&, ad::Var, ad::Var,
                                         ad::Var, EncodePass);
template ad::Var question_summary<float>(ad::Graph32&, FastQAParamsT<float>&, ad::Var);
template ad::Var question_summary<double>(ad::Graph64&, FastQAParamsT<double>&, ad::Var);
template ad::Var start_logits<float>(ad::Graph32&, FastQAParamsT<float>&, ad::Var, ad::Var);
template ad::Var start_logits<double>(ad::Graph64&, FastQAParamsT<double>&, ad::Var, ad::Var);
template ad::Var end_logits<float>(ad::Graph32&, FastQAParamsT<float>&, ad::Var, ad::Var, int64_t);
template ad::Var end_logits<double>(ad::Graph64&, FastQAParamsT<double>&, ad::Var, ad::Var,
                                    int64_t);
template EncodedPair encode_example<float>(ad::Graph32&, FastQAParamsT<float>&, ad::Var, ad::Var,
                                           const std::vector<float>&, const FastQAOptions&);
template EncodedPair encode_example<double>(ad::Graph64&, FastQAParamsT<double>&, ad::Var, ad::Var,
                                            const std::vector<float>&, const FastQAOptions&);
template std::vector<AnswerPrediction> beam_search_decode<float>(ad::Graph32&,
                                                                 FastQAParamsT<float>&, ad::Var,
                                                                 ad::Var, int64_t);
template std::vector<AnswerPrediction> beam_search_decode<double>(ad::Graph64&,
                                                                  FastQAParamsT<double>&, ad::Var,
                                                                  ad::Var, int64_t);
template ad::Var span_loss<float>(ad::Graph32&, FastQAParamsT<float>&, ad::Var, ad::Var,
                                  const std::vector<Span>&, bool);
template ad::Var span_loss<double>(ad::Graph64&, FastQAParamsT<double>&, ad::Var, ad::Var,
                                   const std::vector<Span>&, bool);

}  // namespace fastqa
