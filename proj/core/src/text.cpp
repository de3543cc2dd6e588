#include "fastqa/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace fastqa {

std::vector<uint32_t> utf8_decode(const std::string& s) {
  std::vector<uint32_t> out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    uint32_t cp;
    size_t extra;
    if (c < 0x80) {
      cp = c;
      extra = 0;
    } else if ((c & 0xE0) == 0xC0) {
      cp = c & 0x1F;
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      cp = c & 0x0F;
      extra = 2;
    } else if ((c & 0xF8) == 0xF0) {
      cp = c & 0x07;
      extra = 3;
    } else {
      throw Error("utf8: invalid lead byte at offset " + std::to_string(i));
    }
    if (extra > 0 && i + extra >= s.size()) {
      throw Error("utf8: truncated sequence at offset " + std::to_string(i));
    }
    for (size_t k = 1; k <= extra; ++k) {
      unsigned char cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) throw Error("utf8: bad continuation at offset " + std::to_string(i + k));
      cp = (cp << 6) | (cc & 0x3F);
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::string utf8_encode(const std::vector<uint32_t>& cps) {
  std::string out;
  for (uint32_t cp : cps) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }
  return out;
}

std::string substr_cps(const std::string& s, int64_t start, int64_t stop) {
  auto cps = utf8_decode(s);
  if (start < 0 || stop > static_cast<int64_t>(cps.size()) || start > stop) {
    throw Error("substr_cps: range [" + std::to_string(start) + "," + std::to_string(stop) +
                ") outside string of " + std::to_string(cps.size()) + " code points");
  }
  return utf8_encode(std::vector<uint32_t>(cps.begin() + start, cps.begin() + stop));
}

namespace {

enum class CpClass { kSpace, kPunct, kAlnum };

CpClass classify(uint32_t cp) {
  if (cp < 0x80) {
    if (std::isspace(static_cast<int>(cp))) return CpClass::kSpace;
    if (std::isalnum(static_cast<int>(cp))) return CpClass::kAlnum;
    return CpClass::kPunct;
  }
  // spaces outside ASCII: NBSP, the U+2000 block spaces and zero-width marks,
  // line/paragraph separators, narrow/medium spaces, ideographic space
  if (cp == 0xA0 || (cp >= 0x2000 && cp <= 0x200F) || cp == 0x2028 || cp == 0x2029 ||
      cp == 0x202F || cp == 0x205F || cp == 0x3000) {
    return CpClass::kSpace;
  }
  // Latin-1 punctuation, general punctuation block, multiply/divide signs
  if ((cp >= 0xA1 && cp <= 0xBF) || (cp >= 0x2010 && cp <= 0x206F) || cp == 0xD7 || cp == 0xF7) {
    return CpClass::kPunct;
  }
  return CpClass::kAlnum;
}

}  // namespace

std::string lowercase_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::vector<Token> tokenize(const std::string& text, TokenizeMode mode) {
  auto cps = utf8_decode(text);
  std::vector<Token> tokens;
  std::vector<uint32_t> cur;
  int64_t cur_start = -1;
  auto flush = [&](int64_t stop) {
    if (cur.empty()) return;
    tokens.push_back({utf8_encode(cur), cur_start, stop});
    cur.clear();
    cur_start = -1;
  };
  for (int64_t i = 0; i < static_cast<int64_t>(cps.size()); ++i) {
    uint32_t cp = cps[static_cast<size_t>(i)];
    switch (classify(cp)) {
      case CpClass::kSpace:
        flush(i);
        break;
      case CpClass::kPunct:
        flush(i);
        tokens.push_back({utf8_encode({cp}), i, i + 1});
        break;
      case CpClass::kAlnum:
        if (cur.empty()) cur_start = i;
        cur.push_back(cp);
        break;
    }
  }
  flush(static_cast<int64_t>(cps.size()));
  if (mode == TokenizeMode::kBow) {
    for (auto& t : tokens) t.text = lowercase_ascii(t.text);
  }
  return tokens;
}

bool is_stopword(const std::string& w) {
  static const std::unordered_set<std::string> kStopwords = {
      "a",    "an",   "the",  "of",   "in",    "on",    "at",   "to",   "for",  "with",
      "by",   "from", "as",   "is",   "are",   "was",   "were", "be",   "been", "being",
      "am",   "do",   "does", "did",  "have",  "has",   "had",  "it",   "its",  "this",
      "that", "these", "those", "he",  "she",   "they",  "we",   "you",  "i",    "his",
      "her",  "their", "our",  "your", "my",    "and",   "or",   "but",  "not",  "no",
      "if",   "than",  "then", "so",   "about", "into"};
  return kStopwords.count(w) > 0;
}

bool is_alnum_token(const std::string& token) {
  auto cps = utf8_decode(token);
  if (cps.empty()) return false;
  for (uint32_t cp : cps)
    if (classify(cp) != CpClass::kAlnum) return false;
  return true;
}

Vocabulary::Vocabulary() {
  add_word("<pad>");
  add_word("<unk>");
  add_char(0);  // pad
  add_char(1);  // unk; real inventory starts at printable ASCII
}

int64_t Vocabulary::add_word(const std::string& token) {
  auto it = token_to_id.find(token);
  if (it != token_to_id.end()) return it->second;
  int64_t id = static_cast<int64_t>(id_to_token.size());
  id_to_token.push_back(token);
  token_to_id.emplace(token, id);
  return id;
}

int64_t Vocabulary::add_char(uint32_t cp) {
  auto it = char_to_id.find(cp);
  if (it != char_to_id.end()) return it->second;
  int64_t id = static_cast<int64_t>(id_to_char.size());
  id_to_char.push_back(cp);
  char_to_id.emplace(cp, id);
  return id;
}

int64_t Vocabulary::word_id(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnk : it->second;
}

int64_t Vocabulary::char_id(uint32_t cp) const {
  auto it = char_to_id.find(cp);
  return it == char_to_id.end() ? kUnk : it->second;
}

void Vocabulary::seed_printable_ascii() {
  for (uint32_t cp = 0x20; cp <= 0x7E; ++cp) add_char(cp);
}

uint64_t Vocabulary::word_hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : id_to_token) {
    h = fnv1a(t.data(), t.size(), h);
    h = fnv1a("\n", 1, h);
  }
  return h;
}

uint64_t Vocabulary::char_hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (uint32_t cp : id_to_char) h = fnv1a(&cp, sizeof(cp), h);
  return h;
}

std::string TokenizedExample::span_text(const Span& s) const {
  if (s.start < 0 || s.end < s.start || s.end >= static_cast<int64_t>(context_char_spans.size())) {
    throw Error("span_text: span outside context");
  }
  return substr_cps(raw_context, context_char_spans[static_cast<size_t>(s.start)].start,
                    context_char_spans[static_cast<size_t>(s.end)].end);
}

void TokenizedExample::assign_char_ids(Vocabulary& vocab, bool grow) {
  auto convert = [&](const std::vector<std::string>& toks) {
    std::vector<std::vector<int64_t>> out;
    out.reserve(toks.size());
    for (const auto& t : toks) {
      std::vector<int64_t> ids;
      for (uint32_t cp : utf8_decode(t)) ids.push_back(grow ? vocab.add_char(cp) : vocab.char_id(cp));
      out.push_back(std::move(ids));
    }
    return out;
  };
  question_chars = convert(question_tokens);
  context_chars = convert(context_tokens);
}

Embeddings load_embeddings(const std::string& path, int64_t expect_dim) {
  std::ifstream in(path);
  if (!in) throw Error("load_embeddings: cannot open " + path);
  Embeddings emb;
  std::vector<float> rows;
  std::string line;
  int64_t lineno = 0;
  int64_t dim = expect_dim;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    std::vector<float> vec;
    double v;
    while (ls >> v) vec.push_back(static_cast<float>(v));
    if (dim < 0) dim = static_cast<int64_t>(vec.size());
    if (static_cast<int64_t>(vec.size()) != dim || token.empty()) {
      throw Error("load_embeddings: line " + std::to_string(lineno) + ": expected token + " +
                  std::to_string(dim) + " floats, got " + std::to_string(vec.size()));
    }
    if (emb.vocab.token_to_id.count(token)) {
      ++emb.duplicates;  // first occurrence wins
      continue;
    }
    emb.vocab.add_word(token);
    rows.insert(rows.end(), vec.begin(), vec.end());
  }
  if (dim <= 0) throw Error("load_embeddings: no entries in " + path);
  emb.dim = dim;
  int64_t v_count = emb.vocab.word_count();
  std::vector<float> data(static_cast<size_t>(v_count * dim), 0.0f);
  // rows 0/1 (pad/unknown) stay zero
  std::copy(rows.begin(), rows.end(), data.begin() + 2 * dim);
  emb.table = Tensor32({v_count, dim}, std::move(data));
  return emb;
}

namespace {

std::vector<std::string> token_texts(const std::vector<Token>& toks) {
  std::vector<std::string> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(t.text);
  return out;
}

}  // namespace

std::vector<TokenizedExample> ingest_squad(const std::string& path, TokenizeMode mode,
                                           IngestStats* stats) {
  std::ifstream in(path);
  if (!in) throw Error("ingest_squad: cannot open " + path);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const std::exception& e) {
    throw Error("ingest_squad: " + path + ": " + e.what());
  }
  if (!root.contains("data") || !root["data"].is_array()) {
    throw Error("ingest_squad: " + path + ": missing data[]");
  }
  IngestStats local;
  std::vector<TokenizedExample> out;
  for (const auto& article : root["data"]) {
    for (const auto& para : article.at("paragraphs")) {
      std::string context = para.at("context").get<std::string>();
      auto ctx_tokens = tokenize(context, mode);
      for (const auto& qa : para.at("qas")) {
        TokenizedExample ex;
        ex.id = qa.at("id").get<std::string>();
        ex.raw_context = context;
        auto q_tokens = tokenize(qa.at("question").get<std::string>(), mode);
        ex.question_tokens = token_texts(q_tokens);
        ex.context_tokens = token_texts(ctx_tokens);
        for (const auto& t : ctx_tokens) ex.context_char_spans.push_back({t.start, t.stop});
        for (const auto& ans : qa.at("answers")) {
          std::string text = ans.at("text").get<std::string>();
          int64_t start_cp = ans.at("answer_start").get<int64_t>();
          int64_t end_cp = start_cp + static_cast<int64_t>(utf8_decode(text).size()) - 1;
          ex.raw_answers.push_back(text);
          ++local.answers;
          int64_t s_tok = -1, e_tok = -1;
          for (size_t ti = 0; ti < ctx_tokens.size(); ++ti) {
            const auto& t = ctx_tokens[ti];
            if (s_tok < 0 && start_cp >= t.start && start_cp < t.stop) s_tok = static_cast<int64_t>(ti);
            if (end_cp >= t.start && end_cp < t.stop) e_tok = static_cast<int64_t>(ti);
          }
          if (s_tok < 0 || e_tok < 0 || e_tok < s_tok) {
            ++local.answers_dropped;
            continue;
          }
          Span sp{s_tok, e_tok};
          if (std::find(ex.gold_spans.begin(), ex.gold_spans.end(), sp) == ex.gold_spans.end()) {
            ex.gold_spans.push_back(sp);
          }
        }
        if (ex.gold_spans.empty()) ++local.examples_without_spans;
        ++local.examples;
        out.push_back(std::move(ex));
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const TokenizedExample& a, const TokenizedExample& b) { return a.id < b.id; });
  if (stats) *stats = local;
  return out;
}

std::optional<TokenizedExample> cut_context(const TokenizedExample& example, int64_t max_len) {
  int64_t L = static_cast<int64_t>(example.context_tokens.size());
  if (max_len <= 0) throw Error("cut_context: max_len must be positive");
  if (L <= max_len) return example;
  int64_t n_windows = L - max_len + 1;
  // windows containing span (s,e) are starts in [e - max_len + 1, s]
  std::vector<int32_t> delta(static_cast<size_t>(n_windows + 1), 0);
  for (const Span& sp : example.gold_spans) {
    int64_t lo = std::max<int64_t>(0, sp.end - max_len + 1);
    int64_t hi = std::min(sp.start, n_windows - 1);
    if (lo > hi) continue;  // span longer than the window
    ++delta[static_cast<size_t>(lo)];
    --delta[static_cast<size_t>(hi + 1)];
  }
  int64_t best_w = -1;
  int32_t best_count = 0, run = 0;
  for (int64_t w = 0; w < n_windows; ++w) {
    run += delta[static_cast<size_t>(w)];
    if (run > best_count) {
      best_count = run;
      best_w = w;
    }
  }
  if (best_w < 0) return std::nullopt;

  TokenizedExample out;
  out.id = example.id;
  out.question_tokens = example.question_tokens;
  out.question_chars = example.question_chars;
  out.raw_context = example.raw_context;
  out.raw_answers = example.raw_answers;
  auto copy_window = [&](const auto& src, auto& dst) {
    if (static_cast<int64_t>(src.size()) == L) {
      dst.assign(src.begin() + best_w, src.begin() + best_w + max_len);
    }
  };
  copy_window(example.context_tokens, out.context_tokens);
  copy_window(example.context_char_spans, out.context_char_spans);
  copy_window(example.context_chars, out.context_chars);
  for (const Span& sp : example.gold_spans) {
    if (sp.start >= best_w && sp.end < best_w + max_len) {
      out.gold_spans.push_back({sp.start - best_w, sp.end - best_w});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// preprocessed cache: "FQAX" magic, u32 version, then length-prefixed fields
// ---------------------------------------------------------------------------

namespace {

constexpr char kCacheMagic[4] = {'F', 'Q', 'A', 'X'};
constexpr uint32_t kCacheVersion = 1;

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_i64(std::ostream& os, int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void put_str_vec(std::ostream& os, const std::vector<std::string>& v) {
  put_u32(os, static_cast<uint32_t>(v.size()));
  for (const auto& s : v) put_str(os, s);
}
void put_span_vec(std::ostream& os, const std::vector<Span>& v) {
  put_u32(os, static_cast<uint32_t>(v.size()));
  for (const auto& s : v) {
    put_i64(os, s.start);
    put_i64(os, s.end);
  }
}
void put_ids_vec(std::ostream& os, const std::vector<std::vector<int64_t>>& v) {
  put_u32(os, static_cast<uint32_t>(v.size()));
  for (const auto& ids : v) {
    put_u32(os, static_cast<uint32_t>(ids.size()));
    for (int64_t id : ids) put_i64(os, id);
  }
}

uint32_t get_u32(std::istream& is) {
  uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw Error("examples cache: truncated");
  return v;
}
int64_t get_i64(std::istream& is) {
  int64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) throw Error("examples cache: truncated");
  return v;
}
std::string get_str(std::istream& is) {
  uint32_t n = get_u32(is);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw Error("examples cache: truncated");
  return s;
}
std::vector<std::string> get_str_vec(std::istream& is) {
  uint32_t n = get_u32(is);
  std::vector<std::string> v(n);
  for (auto& s : v) s = get_str(is);
  return v;
}
std::vector<Span> get_span_vec(std::istream& is) {
  uint32_t n = get_u32(is);
  std::vector<Span> v(n);
  for (auto& s : v) {
    s.start = get_i64(is);
    s.end = get_i64(is);
  }
  return v;
}
std::vector<std::vector<int64_t>> get_ids_vec(std::istream& is) {
  uint32_t n = get_u32(is);
  std::vector<std::vector<int64_t>> v(n);
  for (auto& ids : v) {
    uint32_t m = get_u32(is);
    ids.resize(m);
    for (auto& id : ids) id = get_i64(is);
  }
  return v;
}

}  // namespace

void save_examples_cache(const std::string& path, const std::vector<TokenizedExample>& examples) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("examples cache: cannot write " + path);
  os.write(kCacheMagic, 4);
  put_u32(os, kCacheVersion);
  put_u32(os, static_cast<uint32_t>(examples.size()));
  for (const auto& ex : examples) {
    put_str(os, ex.id);
    put_str_vec(os, ex.question_tokens);
    put_str_vec(os, ex.context_tokens);
    put_span_vec(os, ex.context_char_spans);
    put_ids_vec(os, ex.question_chars);
    put_ids_vec(os, ex.context_chars);
    put_span_vec(os, ex.gold_spans);
    put_str(os, ex.raw_context);
    put_str_vec(os, ex.raw_answers);
  }
  if (!os) throw Error("examples cache: write failed for " + path);
}

std::vector<TokenizedExample> load_examples_cache(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("examples cache: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCacheMagic, 4) != 0) {
    throw Error("examples cache: " + path + " has wrong magic");
  }
  uint32_t version = get_u32(is);
  if (version != kCacheVersion) {
    throw Error("examples cache: version " + std::to_string(version) + " unsupported (expected " +
                std::to_string(kCacheVersion) + ")");
  }
  uint32_t count = get_u32(is);
  std::vector<TokenizedExample> out(count);
  for (auto& ex : out) {
    ex.id = get_str(is);
    ex.question_tokens = get_str_vec(is);
    ex.context_tokens = get_str_vec(is);
    ex.context_char_spans = get_span_vec(is);
    ex.question_chars = get_ids_vec(is);
    ex.context_chars = get_ids_vec(is);
    ex.gold_spans = get_span_vec(is);
    ex.raw_context = get_str(is);
    ex.raw_answers = get_str_vec(is);
  }
  return out;
}

}  // namespace fastqa
