#pragma once

#include <vector>

#include "fastqa/graph.hpp"
#include "fastqa/text.hpp"

namespace fastqa {

struct EmbedderConfig {
  bool use_chars = false;  // char-CNN is an increment over the lookup baseline
  int64_t c_dim = 50;
  int64_t char_out_dim = 100;
  int64_t max_chars = 25;  // per-token truncation; padded up to at least the kernel width
};

template <typename T>
struct EmbedderParamsT {
  TensorT<T> E;  // (|V|, word_dim), fixed
  TensorT<T> char_table;   // (|C|, c_dim)
  TensorT<T> conv_kernel;  // (c_dim, out_dim, 5)
  TensorT<T> conv_bias;    // (out_dim,)
  EmbedderConfig config;

  int64_t word_dim() const { return E.dim(1); }
  int64_t out_dim() const { return word_dim() + (config.use_chars ? config.char_out_dim : 0); }

  std::vector<TensorT<T>*> trainable();
  std::vector<std::pair<std::string, TensorT<T>*>> named_trainable();

  template <typename U>
  EmbedderParamsT<U> cast() const {
    EmbedderParamsT<U> out;
    out.E = E.template cast<U>();
    out.char_table = char_table.template cast<U>();
    out.conv_kernel = conv_kernel.template cast<U>();
    out.conv_bias = conv_bias.template cast<U>();
    out.config = config;
    return out;
  }
};

using EmbedderParams = EmbedderParamsT<float>;

template <typename T>
EmbedderParamsT<T> init_embedder(TensorT<T> E, int64_t char_vocab, const EmbedderConfig& config,
                                 uint64_t seed);

// (L, out_dim) rows: fixed word lookup, concatenated with a width-5 char-CNN
// max-pooled over time when enabled. Out-of-range word ids fall back to the
// unknown row.
template <typename T>
ad::Var embed_tokens(ad::GraphT<T>& g, EmbedderParamsT<T>& params, ad::Var e_table,
                     const std::vector<int64_t>& word_ids,
                     const std::vector<std::vector<int64_t>>& char_ids);

// Convenience: ids from tokens via the vocabulary.
std::vector<int64_t> word_ids_for(const Vocabulary& vocab, const std::vector<std::string>& tokens);

}  // namespace fastqa
