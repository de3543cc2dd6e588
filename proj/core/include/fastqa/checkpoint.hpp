#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "json.hpp"

#include "fastqa/tensor.hpp"

namespace fastqa {

// Versioned on-disk container: resolved config, integrity hashes for the
// vocabulary/embeddings the parameters were trained against, and every named
// tensor (parameters plus optimizer moments) as little-endian float32.
struct Checkpoint {
  uint32_t version = 1;
  nlohmann::json config;
  std::map<std::string, uint64_t> hashes;
  std::map<std::string, Tensor32> tensors;
  uint64_t adam_step = 0;
};

// Atomic: writes a sibling temp file, then renames over path.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// Structured errors on bad magic, unsupported version, or truncation.
Checkpoint load_checkpoint(const std::string& path);

// Integrity guard for resuming: compares a stored hash against the current
// artifact's, with a descriptive error naming the mismatched component.
void require_hash(const Checkpoint& ckpt, const std::string& name, uint64_t expected);

}  // namespace fastqa
