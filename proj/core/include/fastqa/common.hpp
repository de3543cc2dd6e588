#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fastqa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inclusive token span [start, end].
struct Span {
  int64_t start = 0;
  int64_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

inline int64_t span_len(const Span& s) { return s.end - s.start + 1; }

// splitmix64 step; used to derive independent sub-seeds from (seed, tag)
// pairs so that resuming a run never has to serialize generator state.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

// FNV-1a over bytes; used for vocabulary fingerprints in checkpoints.
inline uint64_t fnv1a(const void* bytes, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

// A char pointer with a hash in the second slot would otherwise bind to the
// (bytes, n) overload, with the hash acting as the length.
uint64_t fnv1a(const char*, uint64_t) = delete;

std::string shape_str(const std::vector<int64_t>& shape);

}  // namespace fastqa
