#include "fastqa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "json.hpp"

#include "fastqa/common.hpp"

namespace fastqa {

namespace {

constexpr int kTypes = 10;
constexpr int kEntitiesPerType = 4;
constexpr int kContent = 49;  // 10 + 40 + 49 + "what" = 100 words

const char* kTypeNames[kTypes] = {"color", "animal", "city",  "metal", "fruit",
                                  "sport", "tool",   "river", "month", "gem"};

// Content words share one embedding vector, so which of them surface-match
// the question is invisible to a model that ignores the token strings.
struct Lexicon {
  std::vector<std::string> entities;  // [type * 4 + k]
  std::vector<std::string> content;

  Lexicon() {
    for (int t = 0; t < kTypes; ++t)
      for (int k = 0; k < kEntitiesPerType; ++k)
        entities.push_back(std::string(kTypeNames[t]) + std::to_string(k));
    for (int i = 0; i < kContent; ++i) content.push_back("w" + std::to_string(10 + i));
  }
};

std::vector<double> unit_vector(int64_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(static_cast<size_t>(dim));
  double norm = 0.0;
  for (auto& x : v) {
    x = gauss(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

void write_embeddings(const Lexicon& lex, const SynthConfig& cfg, const std::string& path) {
  std::mt19937_64 rng(mix_seed(cfg.seed, 0xE3B));
  std::vector<std::vector<double>> type_dirs;
  for (int t = 0; t < kTypes; ++t) type_dirs.push_back(unit_vector(cfg.dim, rng));

  auto typed_vector = [&](int t) {
    auto noise = unit_vector(cfg.dim, rng);
    std::vector<double> v(static_cast<size_t>(cfg.dim));
    double norm = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
      v[i] = 0.7 * type_dirs[size_t(t)][i] + 0.5 * noise[i];
      norm += v[i] * v[i];
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
  };

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot write embeddings: " + path);
  char buf[64];
  auto emit = [&](const std::string& word, const std::vector<double>& v) {
    f << word;
    for (double x : v) {
      std::snprintf(buf, sizeof(buf), " %.6f", x);
      f << buf;
    }
    f << "\n";
  };
  for (int t = 0; t < kTypes; ++t) emit(kTypeNames[t], typed_vector(t));
  for (int t = 0; t < kTypes; ++t)
    for (int k = 0; k < kEntitiesPerType; ++k)
      emit(lex.entities[size_t(t * kEntitiesPerType + k)], typed_vector(t));
  const auto shared = unit_vector(cfg.dim, rng);
  for (const auto& w : lex.content) emit(w, shared);
  emit("what", unit_vector(cfg.dim, rng));
}

struct BuiltExample {
  std::string context;
  std::string question;
  std::string answer;
  int64_t answer_start = 0;
};

BuiltExample build_example(const Lexicon& lex, const SynthConfig& cfg, std::mt19937_64& rng) {
  auto pick = [&](int64_t n) { return std::uniform_int_distribution<int64_t>(0, n - 1)(rng); };

  const int t = int(pick(kTypes));
  const int k = int(pick(kEntitiesPerType));
  int k2 = int(pick(kEntitiesPerType - 1));
  if (k2 >= k) ++k2;
  const std::string& answer = lex.entities[size_t(t * kEntitiesPerType + k)];
  const std::string& decoy = lex.entities[size_t(t * kEntitiesPerType + k2)];

  // six distinct content words: three for the question, three for the decoy
  std::vector<int64_t> cue_ids;
  while (cue_ids.size() < 6) {
    int64_t c = pick(kContent);
    if (std::find(cue_ids.begin(), cue_ids.end(), c) == cue_ids.end()) cue_ids.push_back(c);
  }
  auto is_q_cue = [&](int64_t c) {
    return c == cue_ids[0] || c == cue_ids[1] || c == cue_ids[2];
  };
  // any content word except the question's own three
  auto pick_dark = [&]() {
    for (;;) {
      int64_t c = pick(kContent);
      if (!is_q_cue(c)) return lex.content[size_t(c)];
    }
  };
  std::vector<std::string> q_cues = {lex.content[size_t(cue_ids[0])],
                                     lex.content[size_t(cue_ids[1])],
                                     lex.content[size_t(cue_ids[2])]};
  std::vector<std::string> d_cues = {lex.content[size_t(cue_ids[3])],
                                     lex.content[size_t(cue_ids[4])],
                                     lex.content[size_t(cue_ids[5])]};

  const bool leak = std::bernoulli_distribution(cfg.leak_prob)(rng);
  // answer block: the entity immediately followed by the cue run; decoy
  // block: same-type entity, one spacer, then three cue words (the question's
  // own, reshuffled, when leaking). Both right-windows hold three matches.
  std::vector<std::string> answer_block = {answer, q_cues[0], q_cues[1], q_cues[2]};
  std::vector<std::string> decoy_cues = leak ? q_cues : d_cues;
  std::shuffle(decoy_cues.begin(), decoy_cues.end(), rng);
  std::vector<std::string> decoy_block = {decoy, pick_dark(), decoy_cues[0], decoy_cues[1],
                                          decoy_cues[2]};

  const int64_t L = cfg.context_len;
  int64_t a_pos = 0, d_pos = 0;
  for (;;) {
    a_pos = pick(L - int64_t(answer_block.size()) + 1);
    d_pos = pick(L - int64_t(decoy_block.size()) + 1);
    const int64_t a_end = a_pos + int64_t(answer_block.size());
    const int64_t d_end = d_pos + int64_t(decoy_block.size());
    if (a_end + 1 <= d_pos || d_end + 1 <= a_pos) break;
  }

  std::vector<std::string> tokens(static_cast<size_t>(L));
  for (auto& tok : tokens) tok = pick_dark();
  for (size_t i = 0; i < answer_block.size(); ++i) tokens[size_t(a_pos) + i] = answer_block[i];
  for (size_t i = 0; i < decoy_block.size(); ++i) tokens[size_t(d_pos) + i] = decoy_block[i];

  BuiltExample ex;
  for (int64_t j = 0; j < L; ++j) {
    if (j) ex.context += ' ';
    if (j == a_pos) ex.answer_start = int64_t(ex.context.size());
    ex.context += tokens[size_t(j)];
  }
  ex.question = std::string("what ") + kTypeNames[t] + ' ' + q_cues[0] + ' ' + q_cues[1] + ' ' +
                q_cues[2];
  ex.answer = answer;
  return ex;
}

void write_split(const Lexicon& lex, const SynthConfig& cfg, const std::string& path,
                 const std::string& split, int64_t count, uint64_t seed) {
  std::mt19937_64 rng(seed);
  nlohmann::json paragraphs = nlohmann::json::array();
  for (int64_t i = 0; i < count; ++i) {
    BuiltExample ex = build_example(lex, cfg, rng);
    char id[64];
    std::snprintf(id, sizeof(id), "synth-%s-%05lld", split.c_str(), (long long)i);
    nlohmann::json qa{{"id", id},
                      {"question", ex.question},
                      {"answers", nlohmann::json::array({{{"text", ex.answer},
                                                          {"answer_start", ex.answer_start}}})}};
    paragraphs.push_back(
        {{"context", ex.context}, {"qas", nlohmann::json::array({std::move(qa)})}});
  }
  nlohmann::json doc{{"version", "synth-1"},
                     {"data", nlohmann::json::array(
                                  {{{"title", "synth"}, {"paragraphs", std::move(paragraphs)}}})}};
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot write dataset: " + path);
  f << doc.dump() << "\n";
}

}  // namespace

SynthPaths generate_synth(const SynthConfig& cfg, const std::string& out_dir) {
  if (cfg.context_len < 16) throw Error("synth: context_len too small");
  if (cfg.leak_prob < 0.0 || cfg.leak_prob > 1.0) throw Error("synth: leak_prob out of range");
  std::filesystem::create_directories(out_dir);
  const Lexicon lex;
  SynthPaths paths{out_dir + "/train.json", out_dir + "/dev.json", out_dir + "/embeddings.txt"};
  write_embeddings(lex, cfg, paths.embeddings);
  write_split(lex, cfg, paths.train_json, "train", cfg.n_train, mix_seed(cfg.seed, 0x7A1));
  write_split(lex, cfg, paths.dev_json, "dev", cfg.n_dev, mix_seed(cfg.seed, 0xDE5));
  return paths;
}

}  // namespace fastqa
