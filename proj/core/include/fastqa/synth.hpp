#pragma once

#include <cstdint>
#include <string>

namespace fastqa {

// Desk-scale dataset exercising the context/type matching heuristic: each
// context hides the answer entity next to a run of question words, plus a
// same-type decoy entity. With probability leak_prob the decoy also sits near
// the question words, scattered so that fixed-window statistics tie with the
// answer's while the token-level adjacency pattern still separates them.
struct SynthConfig {
  int64_t n_train = 5000;
  int64_t n_dev = 500;
  int64_t context_len = 60;
  int64_t dim = 32;
  double leak_prob = 0.25;
  uint64_t seed = 7;
};

struct SynthPaths {
  std::string train_json;
  std::string dev_json;
  std::string embeddings;
};

SynthPaths generate_synth(const SynthConfig& cfg, const std::string& out_dir);

}  // namespace fastqa
