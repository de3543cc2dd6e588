#include "fastqa/wiq.hpp"

#include <unordered_map>
#include <unordered_set>

#include "fastqa/text.hpp"

namespace fastqa {

std::vector<float> compute_wiq_binary(const std::vector<std::string>& context_tokens,
                                      const std::vector<std::string>& question_tokens,
                                      WiqPolicy policy) {
  std::unordered_set<std::string> qset;
  if (policy == WiqPolicy::kSurface) {
    qset.insert(question_tokens.begin(), question_tokens.end());
  } else {
    for (const auto& q : question_tokens) {
      std::string w = lowercase_ascii(q);
      if (is_alnum_token(w) && !is_stopword(w)) qset.insert(w);
    }
  }
  std::vector<float> out(context_tokens.size(), 0.0f);
  for (size_t j = 0; j < context_tokens.size(); ++j) {
    const std::string& x = context_tokens[j];
    bool hit = policy == WiqPolicy::kSurface ? qset.count(x) > 0
                                             : qset.count(lowercase_ascii(x)) > 0;
    if (hit) out[j] = 1.0f;
  }
  return out;
}

template <typename T>
ad::Var compute_wiq_weighted(ad::GraphT<T>& g, ad::Var context_emb, ad::Var question_emb,
                             ad::Var v_wiq) {
  const auto& cx = g.value(context_emb);
  const auto& q = g.value(question_emb);
  const auto& v = g.value(v_wiq);
  if (cx.rank() != 2 || q.rank() != 2 || v.rank() != 1 || cx.dim(1) != v.dim(0) ||
      q.dim(1) != v.dim(0)) {
    throw Error("compute_wiq_weighted: shapes " + shape_str(cx.shape) + ", " +
                shape_str(q.shape) + ", " + shape_str(v.shape) + " do not conform");
  }
  ad::Var qv = g.mul(question_emb, g.tile_rows(v_wiq, q.dim(0)));
  ad::Var sim = g.matmul(qv, g.transpose(context_emb));  // (L_Q, L_X)
  ad::Var soft = g.softmax(sim, 1);
  return g.sum(soft, 0);
}

template ad::Var compute_wiq_weighted<float>(ad::GraphT<float>&, ad::Var, ad::Var, ad::Var);
template ad::Var compute_wiq_weighted<double>(ad::GraphT<double>&, ad::Var, ad::Var, ad::Var);

std::vector<double> tf_wiq_oracle(const std::vector<std::string>& context_tokens,
                                  const std::vector<std::string>& question_tokens) {
  std::unordered_map<std::string, int64_t> tf_q, tf_c;
  for (const auto& q : question_tokens) ++tf_q[q];
  for (const auto& x : context_tokens) ++tf_c[x];
  std::vector<double> out(context_tokens.size(), 0.0);
  for (size_t j = 0; j < context_tokens.size(); ++j) {
    auto it = tf_q.find(context_tokens[j]);
    if (it == tf_q.end()) continue;
    out[j] = static_cast<double>(it->second) / static_cast<double>(tf_c[context_tokens[j]]);
  }
  return out;
}

std::vector<double> tf_wiq_softmax_pipeline(const std::vector<std::string>& context_tokens,
                                            const std::vector<std::string>& question_tokens) {
  size_t lx = context_tokens.size();
  std::vector<double> out(lx, 0.0);
  Tensor64 sim_row = zeros<double>({static_cast<int64_t>(lx)});
  for (const auto& q : question_tokens) {
    for (size_t j = 0; j < lx; ++j) {
      sim_row.data[j] = context_tokens[j] == q ? 0.0 : -1e30;
    }
    ad::Graph64 g;
    ad::Var soft = g.softmax(g.constant(sim_row), 0);
    const auto& p = g.value(soft);
    for (size_t j = 0; j < lx; ++j) out[j] += p.data[j];
  }
  return out;
}

}  // namespace fastqa
