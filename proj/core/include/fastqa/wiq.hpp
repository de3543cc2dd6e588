#pragma once

#include <string>
#include <vector>

#include "fastqa/graph.hpp"

namespace fastqa {

enum class WiqPolicy { kSurface, kNormalized };

// Indicator feature: 1 where the context token matches some question token.
// The normalized policy lowercases both sides and drops question tokens that
// are stopwords or not alphanumeric before matching.
std::vector<float> compute_wiq_binary(const std::vector<std::string>& context_tokens,
                                      const std::vector<std::string>& question_tokens,
                                      WiqPolicy policy);

// Differentiable weighted feature: sim(i,j) = v_wiq . (x_j * q_i), softmax
// over the context axis per question word, summed over question words.
// context_emb:(L_X,n), question_emb:(L_Q,n), v_wiq:(n,) -> (L_X,).
template <typename T>
ad::Var compute_wiq_weighted(ad::GraphT<T>& g, ad::Var context_emb, ad::Var question_emb,
                             ad::Var v_wiq);

// Closed form of the weighted feature under the discrete similarity
// (0 for a match, -inf otherwise): tf(x_j|Q) / tf(x_j|C) by direct counting.
std::vector<double> tf_wiq_oracle(const std::vector<std::string>& context_tokens,
                                  const std::vector<std::string>& question_tokens);

// The same quantity through the real softmax pipeline with a -1e30 sentinel
// standing in for -inf; used to validate the oracle. Every question token
// must occur in the context, otherwise its softmax line is degenerate.
std::vector<double> tf_wiq_softmax_pipeline(const std::vector<std::string>& context_tokens,
                                            const std::vector<std::string>& question_tokens);

}  // namespace fastqa
