#pragma once

#include <string>
#include <vector>

#include "fastqa/graph.hpp"

namespace fastqa {

enum class LatKind { kQuestionWord, kAfterWhatWhich, kFallback };

struct LatSpan {
  int64_t start = 0;  // token indices into the question, inclusive
  int64_t end = 0;
  LatKind kind = LatKind::kFallback;
};

// Question word(s), or the approximated noun phrase after what/which: up to 3
// consecutive non-function-word tokens. "how many"/"how much" keep both
// tokens. Falls back to the first token when nothing matches.
LatSpan extract_lat(const std::vector<std::string>& question_tokens);

// All (s, e) with e - s + 1 <= max_len, ordered by (s, e).
std::vector<Span> enumerate_spans(int64_t length, int64_t max_len = 10);

template <typename T>
struct BowParamsT {
  int64_t n = 0;  // hidden width
  int64_t d = 0;  // embedding width

  TensorT<T> lat_w, lat_b;      // (n, 3d), (n,)
  TensorT<T> span_w, span_b;    // (n, 5d), (n,)
  TensorT<T> type_h_w, type_h_b;  // (n, 3n), (n,)
  TensorT<T> type_o_w, type_o_b;  // (1, n), (1,)
  TensorT<T> window_weights;    // (12,): {wiq_b, wiq_w} x {5,10,20} x {left, right}
  TensorT<T> v_wiq;             // (d,); BoW matches in the raw embedding space

  std::vector<std::pair<std::string, TensorT<T>*>> named_params();
  std::vector<TensorT<T>*> trainable();
};

using BowParams = BowParamsT<float>;

template <typename T>
BowParamsT<T> init_bow(int64_t n, int64_t d, uint64_t seed);

// z-tilde = tanh(FC([first; last; mean])) over the LAT tokens.
template <typename T>
ad::Var encode_lat(ad::GraphT<T>& g, BowParamsT<T>& p, ad::Var q_emb, const LatSpan& lat);

// Scores for every candidate span: the type MLP over [z~; x~; z~*x~] plus the
// weighted wiq window means. Rows align with the spans argument.
template <typename T>
struct BowScoresT {
  ad::Var total;   // (S,)
  ad::Var type;    // (S,)
  ad::Var ctxt;    // (S,)
};
template <typename T>
BowScoresT<T> bow_span_scores(ad::GraphT<T>& g, BowParamsT<T>& p, ad::Var ctx_emb, ad::Var q_emb,
                              const std::vector<float>& wiq_b, const LatSpan& lat,
                              const std::vector<Span>& spans);

// Span-level softmax cross-entropy; multiple golds marginalize inside the
// log. gold_idx indexes into the enumerated span list.
template <typename T>
ad::Var bow_loss(ad::GraphT<T>& g, ad::Var total_scores, const std::vector<int64_t>& gold_idx);

// Highest-scoring span, ties to the enumeration order (lexicographic).
template <typename T>
int64_t bow_argmax(ad::GraphT<T>& g, ad::Var total_scores);

}  // namespace fastqa
