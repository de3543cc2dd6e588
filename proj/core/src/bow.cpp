#include "fastqa/bow.hpp"

#include <random>

#include "fastqa/text.hpp"
#include "fastqa/wiq.hpp"

namespace fastqa {

namespace {

bool token_is(const std::string& token, const char* word) {
  return lowercase_ascii(token) == word;
}

bool is_question_word(const std::string& token) {
  static const char* kWords[] = {"who", "whom", "whose", "when", "where", "why", "how"};
  for (const char* w : kWords)
    if (token_is(token, w)) return true;
  return false;
}

}  // namespace

LatSpan extract_lat(const std::vector<std::string>& question_tokens) {
  if (question_tokens.empty()) throw Error("extract_lat: empty question");
  int64_t lq = static_cast<int64_t>(question_tokens.size());

  for (int64_t i = 0; i < lq; ++i) {
    if (!token_is(question_tokens[static_cast<size_t>(i)], "what") &&
        !token_is(question_tokens[static_cast<size_t>(i)], "which")) {
      continue;
    }
    // skip function words, then take up to 3 consecutive content tokens
    int64_t j = i + 1;
    while (j < lq && is_stopword(lowercase_ascii(question_tokens[static_cast<size_t>(j)]))) ++j;
    int64_t k = j;
    while (k < lq && k - j < 3 &&
           !is_stopword(lowercase_ascii(question_tokens[static_cast<size_t>(k)]))) {
      ++k;
    }
    if (k > j) return {j, k - 1, LatKind::kAfterWhatWhich};
    break;  // what/which with nothing usable after it: fall through
  }

  for (int64_t i = 0; i < lq; ++i) {
    const std::string& t = question_tokens[static_cast<size_t>(i)];
    if (!is_question_word(t)) continue;
    if (token_is(t, "how") && i + 1 < lq &&
        (token_is(question_tokens[static_cast<size_t>(i + 1)], "many") ||
         token_is(question_tokens[static_cast<size_t>(i + 1)], "much"))) {
      return {i, i + 1, LatKind::kQuestionWord};
    }
    return {i, i, LatKind::kQuestionWord};
  }
  return {0, 0, LatKind::kFallback};
}

std::vector<Span> enumerate_spans(int64_t length, int64_t max_len) {
  if (length < 1) throw Error("enumerate_spans: empty context");
  std::vector<Span> out;
  for (int64_t s = 0; s < length; ++s) {
    int64_t top = std::min(length - 1, s + max_len - 1);
    for (int64_t e = s; e <= top; ++e) out.push_back({s, e});
  }
  return out;
}

template <typename T>
std::vector<std::pair<std::string, TensorT<T>*>> BowParamsT<T>::named_params() {
  return {
      {"bow.lat_w", &lat_w},
      {"bow.lat_b", &lat_b},
      {"bow.span_w", &span_w},
      {"bow.span_b", &span_b},
      {"bow.type_h_w", &type_h_w},
      {"bow.type_h_b", &type_h_b},
      {"bow.type_o_w", &type_o_w},
      {"bow.type_o_b", &type_o_b},
      {"bow.window_weights", &window_weights},
      {"bow.v_wiq", &v_wiq},
  };
}

template <typename T>
std::vector<TensorT<T>*> BowParamsT<T>::trainable() {
  std::vector<TensorT<T>*> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

template <typename T>
BowParamsT<T> init_bow(int64_t n, int64_t d, uint64_t seed) {
  if (n <= 0 || d <= 0) throw Error("init_bow: n and d must be positive");
  BowParamsT<T> p;
  p.n = n;
  p.d = d;
  std::mt19937_64 rng(mix_seed(seed, 31));
  p.lat_w = fan_in_uniform<T>({n, 3 * d}, 3 * d, rng);
  p.lat_b = zeros<T>({n});
  p.span_w = fan_in_uniform<T>({n, 5 * d}, 5 * d, rng);
  p.span_b = zeros<T>({n});
  p.type_h_w = fan_in_uniform<T>({n, 3 * n}, 3 * n, rng);
  p.type_h_b = zeros<T>({n});
  p.type_o_w = fan_in_uniform<T>({1, n}, n, rng);
  p.type_o_b = zeros<T>({1});
  p.window_weights = full<T>({12}, T(0.1));
  p.v_wiq = fan_in_uniform<T>({d}, d, rng);
  for (auto* t : p.trainable()) t->requires_grad = true;
  return p;
}

template <typename T>
ad::Var encode_lat(ad::GraphT<T>& g, BowParamsT<T>& p, ad::Var q_emb, const LatSpan& lat) {
  const auto& q = g.value(q_emb);
  if (lat.start < 0 || lat.end < lat.start || lat.end >= q.dim(0)) {
    throw Error("encode_lat: span outside question");
  }
  ad::Var first = g.row(q_emb, lat.start);
  ad::Var last = g.row(q_emb, lat.end);
  ad::Var within = g.slice(q_emb, 0, lat.start, lat.end + 1);
  ad::Var mean = g.mean(within, 0);  // (d,)
  ad::Var input = g.concat({first, last, mean}, 0);  // (3d,)
  return g.tanh(g.linear(input, g.param(p.lat_w), g.param(p.lat_b)));
}

template <typename T>
BowScoresT<T> bow_span_scores(ad::GraphT<T>& g, BowParamsT<T>& p, ad::Var ctx_emb, ad::Var q_emb,
                              const std::vector<float>& wiq_b, const LatSpan& lat,
                              const std::vector<Span>& spans) {
  const auto& cx = g.value(ctx_emb);
  int64_t lx = cx.dim(0);
  if (static_cast<int64_t>(wiq_b.size()) != lx) {
    throw Error("bow_span_scores: wiq_b length mismatch");
  }
  if (spans.empty()) throw Error("bow_span_scores: no candidate spans");
  int64_t s_count = static_cast<int64_t>(spans.size());

  // type score
  ad::Var z_tilde = encode_lat(g, p, q_emb, lat);                      // (n,)
  ad::Var feats = g.span_features(ctx_emb, spans);                     // (S, 5d)
  ad::Var x_tilde = g.tanh(g.linear(feats, g.param(p.span_w), g.param(p.span_b)));  // (S, n)
  ad::Var zt = g.tile_rows(z_tilde, s_count);
  ad::Var t_in = g.concat({zt, x_tilde, g.mul(zt, x_tilde)}, 1);       // (S, 3n)
  ad::Var t_hidden = g.relu(g.linear(t_in, g.param(p.type_h_w), g.param(p.type_h_b)));
  ad::Var g_type = g.reshape(g.linear(t_hidden, g.param(p.type_o_w), g.param(p.type_o_b)),
                             {s_count});

  // context score
  TensorT<T> b = zeros<T>({lx});
  for (int64_t j = 0; j < lx; ++j) b.data[static_cast<size_t>(j)] = static_cast<T>(wiq_b[static_cast<size_t>(j)]);
  ad::Var wiq_w = compute_wiq_weighted(g, ctx_emb, q_emb, g.param(p.v_wiq));  // (L_X,)
  ad::Var wm_b = g.window_means(g.constant(std::move(b)), spans);             // (S, 6)
  ad::Var wm_w = g.window_means(wiq_w, spans);                                // (S, 6)
  ad::Var wm = g.concat({wm_b, wm_w}, 1);                                     // (S, 12)
  ad::Var g_ctxt = g.matmul(wm, g.param(p.window_weights));                   // (S,)

  BowScoresT<T> out;
  out.type = g_type;
  out.ctxt = g_ctxt;
  out.total = g.add(g_type, g_ctxt);
  return out;
}

template <typename T>
ad::Var bow_loss(ad::GraphT<T>& g, ad::Var total_scores, const std::vector<int64_t>& gold_idx) {
  if (gold_idx.empty()) throw Error("bow_loss: no gold spans among candidates");
  ad::Var all_lse = g.logsumexp(total_scores);
  ad::Var gold_lse = g.logsumexp(g.gather(total_scores, gold_idx));
  return g.sub(all_lse, gold_lse);
}

template <typename T>
int64_t bow_argmax(ad::GraphT<T>& g, ad::Var total_scores) {
  const auto& v = g.value(total_scores).data;
  int64_t best = 0;
  for (int64_t i = 1; i < static_cast<int64_t>(v.size()); ++i) {
    if (v[static_cast<size_t>(i)] > v[static_cast<size_t>(best)]) best = i;
  }
  return best;
}

template struct BowParamsT<float>;
template struct BowParamsT<double>;
template BowParamsT<float> init_bow<float>(int64_t, int64_t, uint64_t);
template BowParamsT<double> init_bow<double>(int64_t, int64_t, uint64_t);
template ad::Var encode_lat<float>(ad::Graph32&, BowParamsT<float>&, ad::Var, const LatSpan&);
template ad::Var encode_lat<double>(ad::Graph64&, BowParamsT<double>&, ad::Var, const LatSpan&);
template BowScoresT<float> bow_span_scores<float>(ad::Graph32&, BowParamsT<float>&, ad::Var,
                                                  ad::Var, const std::vector<float>&,
                                                  const LatSpan&, const std::vector<Span>&);
template BowScoresT<double> bow_span_scores<double>(ad::Graph64&, BowParamsT<double>&, ad::Var,
                                                    ad::Var, const std::vector<float>&,
                                                    const LatSpan&, const std::vector<Span>&);
template ad::Var bow_loss<float>(ad::Graph32&, ad::Var, const std::vector<int64_t>&);
template ad::Var bow_loss<double>(ad::Graph64&, ad::Var, const std::vector<int64_t>&);
template int64_t bow_argmax<float>(ad::Graph32&, ad::Var);
template int64_t bow_argmax<double>(ad::Graph64&, ad::Var);

}  // namespace fastqa
