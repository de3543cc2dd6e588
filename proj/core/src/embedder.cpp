#include "fastqa/embedder.hpp"

#include <random>

namespace fastqa {

template <typename T>
std::vector<TensorT<T>*> EmbedderParamsT<T>::trainable() {
  if (!config.use_chars) return {};
  return {&char_table, &conv_kernel, &conv_bias};
}

template <typename T>
std::vector<std::pair<std::string, TensorT<T>*>> EmbedderParamsT<T>::named_trainable() {
  if (!config.use_chars) return {};
  return {{"embedder.char_table", &char_table},
          {"embedder.conv_kernel", &conv_kernel},
          {"embedder.conv_bias", &conv_bias}};
}

template <typename T>
EmbedderParamsT<T> init_embedder(TensorT<T> E, int64_t char_vocab, const EmbedderConfig& config,
                                 uint64_t seed) {
  EmbedderParamsT<T> p;
  p.E = std::move(E);
  p.E.requires_grad = false;
  p.config = config;
  std::mt19937_64 rng(mix_seed(seed, 11));
  int64_t cv = std::max<int64_t>(char_vocab, 2);
  p.char_table = fan_in_uniform<T>({cv, config.c_dim}, config.c_dim, rng);
  p.conv_kernel =
      fan_in_uniform<T>({config.c_dim, config.char_out_dim, 5}, config.c_dim * 5, rng);
  p.conv_bias = zeros<T>({config.char_out_dim});
  p.char_table.requires_grad = config.use_chars;
  p.conv_kernel.requires_grad = config.use_chars;
  p.conv_bias.requires_grad = config.use_chars;
  return p;
}

template <typename T>
ad::Var embed_tokens(ad::GraphT<T>& g, EmbedderParamsT<T>& params, ad::Var e_table,
                     const std::vector<int64_t>& word_ids,
                     const std::vector<std::vector<int64_t>>& char_ids) {
  if (word_ids.empty()) throw Error("embed_tokens: empty token sequence");
  int64_t v_count = params.E.dim(0);
  std::vector<int64_t> safe = word_ids;
  for (auto& id : safe) {
    if (id < 0 || id >= v_count) id = Vocabulary::kUnk;
  }
  ad::Var words = g.embedding_lookup(e_table, safe);
  if (!params.config.use_chars) return words;

  if (char_ids.size() != word_ids.size()) {
    throw Error("embed_tokens: char sequences (" + std::to_string(char_ids.size()) +
                ") do not match tokens (" + std::to_string(word_ids.size()) + ")");
  }
  int64_t c_count = params.char_table.dim(0);
  ad::Var table = g.param(params.char_table);
  ad::Var kernel = g.param(params.conv_kernel);
  ad::Var bias = g.param(params.conv_bias);
  std::vector<ad::Var> rows;
  rows.reserve(char_ids.size());
  for (const auto& ids : char_ids) {
    std::vector<int64_t> cs(ids.begin(),
                            ids.begin() + std::min<int64_t>(static_cast<int64_t>(ids.size()),
                                                            params.config.max_chars));
    for (auto& id : cs) {
      if (id < 0 || id >= c_count) id = Vocabulary::kUnk;
    }
    while (static_cast<int64_t>(cs.size()) < 5) cs.push_back(Vocabulary::kPad);
    ad::Var ce = g.embedding_lookup(table, cs);
    ad::Var conv = g.conv1d_same(ce, kernel, bias);
    ad::Var pooled = g.max_over_time(conv);  // (out_dim,)
    rows.push_back(g.reshape(pooled, {1, params.config.char_out_dim}));
  }
  ad::Var chars = rows.size() == 1 ? rows[0] : g.concat(rows, 0);
  return g.concat({words, chars}, 1);
}

std::vector<int64_t> word_ids_for(const Vocabulary& vocab, const std::vector<std::string>& tokens) {
  std::vector<int64_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.word_id(t));
  return ids;
}

template struct EmbedderParamsT<float>;
template struct EmbedderParamsT<double>;
template EmbedderParamsT<float> init_embedder<float>(Tensor32, int64_t, const EmbedderConfig&,
                                                     uint64_t);
template EmbedderParamsT<double> init_embedder<double>(Tensor64, int64_t, const EmbedderConfig&,
                                                       uint64_t);
template ad::Var embed_tokens<float>(ad::Graph32&, EmbedderParamsT<float>&, ad::Var,
                                     const std::vector<int64_t>&,
                                     const std::vector<std::vector<int64_t>>&);
template ad::Var embed_tokens<double>(ad::Graph64&, EmbedderParamsT<double>&, ad::Var,
                                      const std::vector<int64_t>&,
                                      const std::vector<std::vector<int64_t>>&);

}  // namespace fastqa
