#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fastqa/tensor.hpp"

namespace fastqa {

// Offsets are code points, not bytes, matching the character offsets used by
// dataset files.
std::vector<uint32_t> utf8_decode(const std::string& s);
std::string utf8_encode(const std::vector<uint32_t>& cps);
std::string substr_cps(const std::string& s, int64_t start, int64_t stop);

enum class TokenizeMode { kFastqa, kBow };

struct Token {
  std::string text;
  int64_t start = 0;  // code-point offsets, half-open
  int64_t stop = 0;
};

// Splits on whitespace (dropped) and at every other non-alphanumeric code
// point (kept as its own token). bow mode lowercases ASCII letters.
std::vector<Token> tokenize(const std::string& text, TokenizeMode mode);

bool is_stopword(const std::string& lowercased);
bool is_alnum_token(const std::string& token);
std::string lowercase_ascii(const std::string& s);

struct Vocabulary {
  static constexpr int64_t kPad = 0;
  static constexpr int64_t kUnk = 1;

  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int64_t> token_to_id;
  std::vector<uint32_t> id_to_char;
  std::unordered_map<uint32_t, int64_t> char_to_id;

  Vocabulary();

  int64_t add_word(const std::string& token);  // existing id when already present
  int64_t add_char(uint32_t cp);
  int64_t word_id(const std::string& token) const;  // kUnk when absent
  int64_t char_id(uint32_t cp) const;
  int64_t word_count() const { return static_cast<int64_t>(id_to_token.size()); }
  int64_t char_count() const { return static_cast<int64_t>(id_to_char.size()); }

  void seed_printable_ascii();

  uint64_t word_hash() const;
  uint64_t char_hash() const;
};

struct TokenizedExample {
  std::string id;
  std::vector<std::string> question_tokens;
  std::vector<std::string> context_tokens;
  std::vector<Span> context_char_spans;  // per context token, half-open code points into raw_context
  std::vector<std::vector<int64_t>> question_chars;  // per-token char ids, filled by assign_char_ids
  std::vector<std::vector<int64_t>> context_chars;
  std::vector<Span> gold_spans;  // inclusive token indices
  std::string raw_context;
  std::vector<std::string> raw_answers;

  std::string span_text(const Span& s) const;
  void assign_char_ids(Vocabulary& vocab, bool grow);
};

struct Embeddings {
  Vocabulary vocab;  // word side only
  Tensor32 table;    // (|V|, dim), rows 0/1 are the zero pad/unknown vectors
  int64_t dim = 0;
  int64_t duplicates = 0;
};

// One entry per line: token then dim floats, space separated. expect_dim < 0
// infers the width from the first line.
Embeddings load_embeddings(const std::string& path, int64_t expect_dim = -1);

struct IngestStats {
  int64_t examples = 0;
  int64_t answers = 0;
  int64_t answers_dropped = 0;       // unalignable answers
  int64_t examples_without_spans = 0;  // kept for evaluation, excluded from training
};

std::vector<TokenizedExample> ingest_squad(const std::string& path, TokenizeMode mode,
                                           IngestStats* stats = nullptr);

// Best max_len window by number of fully contained gold spans, earliest on
// ties; nullopt when no window keeps any span. Short examples pass through.
std::optional<TokenizedExample> cut_context(const TokenizedExample& example, int64_t max_len);

// Versioned binary cache of tokenized examples (documented in the README).
void save_examples_cache(const std::string& path, const std::vector<TokenizedExample>& examples);
std::vector<TokenizedExample> load_examples_cache(const std::string& path);

}  // namespace fastqa
