#include "fastqa/eval.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "fastqa/common.hpp"
#include "fastqa/text.hpp"

namespace fastqa {

std::vector<std::string> normalize_answer_tokens(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& tok : tokenize(s, TokenizeMode::kFastqa)) {
    if (!is_alnum_token(tok.text)) continue;  // punctuation acts as a separator
    std::string t = lowercase_ascii(tok.text);
    if (t == "a" || t == "an" || t == "the") continue;
    out.push_back(std::move(t));
  }
  return out;
}

std::string normalize_answer(const std::string& s) {
  std::string joined;
  for (const auto& t : normalize_answer_tokens(s)) {
    if (!joined.empty()) joined += ' ';
    joined += t;
  }
  return joined;
}

double token_f1(const std::string& pred, const std::string& gold) {
  auto p = normalize_answer_tokens(pred);
  auto g = normalize_answer_tokens(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::unordered_map<std::string, int64_t> counts;
  for (const auto& t : g) ++counts[t];
  int64_t common = 0;
  for (const auto& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  double precision = double(common) / double(p.size());
  double recall = double(common) / double(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

EvalResult evaluate(const std::map<std::string, std::string>& predictions,
                    const std::map<std::string, std::vector<std::string>>& golds) {
  EvalResult res;
  if (golds.empty()) return res;
  double em_sum = 0.0, f1_sum = 0.0;
  for (const auto& [id, answers] : golds) {
    PerQuestion q;
    q.golds = answers;
    auto it = predictions.find(id);
    if (it == predictions.end()) {
      ++res.missing;
    } else {
      q.prediction = it->second;
      std::string norm_pred = normalize_answer(q.prediction);
      for (const auto& gold : answers) {
        if (normalize_answer(gold) == norm_pred) q.em = 1.0;
        q.f1 = std::max(q.f1, token_f1(q.prediction, gold));
      }
    }
    em_sum += q.em;
    f1_sum += q.f1;
    res.per_question.emplace(id, std::move(q));
  }
  res.exact_match = 100.0 * em_sum / double(golds.size());
  res.f1 = 100.0 * f1_sum / double(golds.size());
  return res;
}

namespace {

const std::set<std::string>& question_words() {
  static const std::set<std::string> words = {"what", "which", "who",   "whom", "whose",
                                              "when", "where", "why",  "how"};
  return words;
}

void add_to_summary(DiffSummary& s, const std::string& id, const PerQuestion& q,
                    const std::map<std::string, std::string>& questions) {
  s.ids.push_back(id);
  s.mean_answer_tokens += q.golds.empty() ? 0.0 : double(normalize_answer_tokens(q.golds[0]).size());
  auto it = questions.find(id);
  if (it == questions.end()) return;
  auto toks = tokenize(it->second, TokenizeMode::kFastqa);
  s.mean_question_tokens += double(toks.size());
  std::string w = "other";
  for (const auto& t : toks) {
    std::string lt = lowercase_ascii(t.text);
    if (question_words().count(lt)) {
      w = lt;
      break;
    }
  }
  ++s.question_word_hist[w];
}

void finalize_summary(DiffSummary& s) {
  if (s.ids.empty()) return;
  s.mean_question_tokens /= double(s.ids.size());
  s.mean_answer_tokens /= double(s.ids.size());
}

}  // namespace

DiffResult diff_systems(const EvalResult& a, const EvalResult& b,
                        const std::map<std::string, std::string>& questions) {
  if (a.per_question.size() != b.per_question.size())
    throw Error("diff_systems: result sets cover different question ids");
  DiffResult res;
  for (const auto& [id, qa] : a.per_question) {
    auto it = b.per_question.find(id);
    if (it == b.per_question.end())
      throw Error("diff_systems: id missing from second result set: " + id);
    const PerQuestion& qb = it->second;
    DiffSummary& target = qa.em > 0.5 ? (qb.em > 0.5 ? res.both : res.a_wins)
                                      : (qb.em > 0.5 ? res.b_wins : res.neither);
    add_to_summary(target, id, qa, questions);
  }
  finalize_summary(res.a_wins);
  finalize_summary(res.b_wins);
  finalize_summary(res.both);
  finalize_summary(res.neither);
  return res;
}

}  // namespace fastqa
