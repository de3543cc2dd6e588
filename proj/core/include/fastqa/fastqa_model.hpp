#pragma once

#include <string>
#include <vector>

#include "fastqa/embedder.hpp"
#include "fastqa/graph.hpp"

namespace fastqa {

template <typename T>
struct FastQAParamsT {
  int64_t n = 0;  // hidden width
  int64_t d = 0;  // embedder output width

  TensorT<T> P;  // (n, d) joint projection
  TensorT<T> hw_gate_w, hw_gate_b;  // (n, n), (n,)
  TensorT<T> hw_tr_w, hw_tr_b;
  TensorT<T> v_wiq;  // (n,)
  // shared BiLSTM over [x; wiq_b; wiq_w] rows, input n+2, hidden n
  TensorT<T> lstm_fw_wx, lstm_fw_wh, lstm_fw_b;
  TensorT<T> lstm_bw_wx, lstm_bw_wh, lstm_bw_b;
  TensorT<T> B_ctx, B_q;  // (n, 2n), both starting at [I_n; I_n]
  // answer layer
  TensorT<T> v_q;                 // (n,)
  TensorT<T> start_w, start_b;    // (n, 3n), (n,)
  TensorT<T> v_s;                 // (n,)
  TensorT<T> end_w, end_b;        // (n, 5n), (n,)
  TensorT<T> v_e;                 // (n,)

  std::vector<std::pair<std::string, TensorT<T>*>> named_params();
  std::vector<TensorT<T>*> trainable();

  template <typename U>
  FastQAParamsT<U> cast() const;
};

using FastQAParams = FastQAParamsT<float>;

template <typename T>
FastQAParamsT<T> init_fastqa(int64_t n, int64_t d, uint64_t seed);

// Eq.-level pieces. All builders take embeddings already produced (and
// possibly dropped out) by the embedder.

// x' = x P^T followed by the highway mix g*x' + (1-g)*tanh(FC(x')).
// Returns both since the weighted wiq feature reads the projected stage.
template <typename T>
struct ProjectedT {
  ad::Var projected;  // x'
  ad::Var mixed;      // x-tilde
};
template <typename T>
ProjectedT<T> project_highway(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var emb);

enum class EncodePass { kContext, kQuestion };

// [x-tilde; wiq_b; wiq_w] -> BiLSTM -> tanh(H' B^T) with the pass-specific B.
// The question pass fixes both wiq features to 1.
template <typename T>
ad::Var encode_sequence(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var mixed, ad::Var wiq_b,
                        ad::Var wiq_w, EncodePass pass);

// alpha = softmax(v_q Z), z-tilde = sum_i alpha_i z_i.
template <typename T>
ad::Var question_summary(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var Z);

// s_j = ReLU(FC([h_j; z~; h_j*z~])); logits_j = v_s s_j.
template <typename T>
ad::Var start_logits(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var H, ad::Var z_tilde);

// e_j = ReLU(FC([h_j; h_s; z~; h_j*z~; h_j*h_s])); logits_j = v_e e_j.
// Positions j < s carry a -1e30 additive penalty so softmax assigns them 0.
template <typename T>
ad::Var end_logits(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var H, ad::Var z_tilde,
                   int64_t start);

// Encoder output pair for one example.
struct EncodedPair {
  ad::Var ctx_H;
  ad::Var q_Z;
  ad::Var z_tilde;
};

struct FastQAOptions {
  bool wiq_enabled = true;  // ablation: zero both context wiq features
};

// Full encoder stack over raw embeddings: projection, highway, weighted wiq,
// shared BiLSTM, pass-specific output projection, question summary.
template <typename T>
EncodedPair encode_example(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var ctx_emb, ad::Var q_emb,
                           const std::vector<float>& wiq_b, const FastQAOptions& opts = {});

struct AnswerPrediction {
  int64_t s = 0;
  int64_t e = 0;
  double probability = 0.0;  // p_s(s) * p_e(e|s)
  std::string answer_text;
};

// Ends are decoded for the k most probable starts; ties prefer smaller s,
// then smaller e. k is clamped to the context length. Returns the candidate
// list sorted best-first.
template <typename T>
std::vector<AnswerPrediction> beam_search_decode(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var H,
                                                 ad::Var z_tilde, int64_t k);

// -log p_s(s) - log p_e(e|s) with the end network conditioned on the gold
// start. Multiple golds take the minimum loss (or the marginal over golds).
template <typename T>
ad::Var span_loss(ad::GraphT<T>& g, FastQAParamsT<T>& p, ad::Var H, ad::Var z_tilde,
                  const std::vector<Span>& golds, bool marginal = false);

}  // namespace fastqa
