#pragma once

#include <map>
#include <string>
#include <vector>

namespace fastqa {

// Official-scorer style normalization: lowercase, punctuation to space,
// article tokens dropped, whitespace collapsed.
std::string normalize_answer(const std::string& s);
std::vector<std::string> normalize_answer_tokens(const std::string& s);

// Bag-of-tokens F1 over normalized tokens, multiset intersection. Both sides
// empty after normalization counts as a perfect match.
double token_f1(const std::string& pred, const std::string& gold);

struct PerQuestion {
  double em = 0.0;  // 0/1
  double f1 = 0.0;  // [0,1], max over golds
  std::string prediction;
  std::vector<std::string> golds;
};

struct EvalResult {
  double exact_match = 0.0;  // percent
  double f1 = 0.0;           // percent
  int64_t missing = 0;       // gold ids without a prediction, scored 0
  std::map<std::string, PerQuestion> per_question;
};

EvalResult evaluate(const std::map<std::string, std::string>& predictions,
                    const std::map<std::string, std::vector<std::string>>& golds);

struct DiffSummary {
  std::vector<std::string> ids;
  double mean_question_tokens = 0.0;
  double mean_answer_tokens = 0.0;  // first gold answer
  std::map<std::string, int64_t> question_word_hist;
};

struct DiffResult {
  DiffSummary a_wins;  // A EM 1, B EM 0
  DiffSummary b_wins;
  DiffSummary both;
  DiffSummary neither;
};

// Win/loss partition of two systems scored on the same questions. The
// optional question texts feed the per-set summaries.
DiffResult diff_systems(const EvalResult& a, const EvalResult& b,
                        const std::map<std::string, std::string>& questions = {});

}  // namespace fastqa
