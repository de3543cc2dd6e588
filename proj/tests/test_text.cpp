#include <algorithm>
#include <random>

#include "doctest.h"

#include "fastqa/text.hpp"
#include "test_util.hpp"

using namespace fastqa;

TEST_CASE("tokenizer splits alnum runs and keeps punctuation as single tokens") {
  auto toks = tokenize("Who wrote \"War and Peace\"?", TokenizeMode::kFastqa);
  std::vector<std::string> want = {"Who", "wrote", "\"", "War", "and", "Peace", "\"", "?"};
  REQUIRE(toks.size() == want.size());
  for (size_t i = 0; i < want.size(); ++i) CHECK(toks[i].text == want[i]);

  // offsets are half-open code-point ranges into the raw text
  CHECK(toks[0].start == 0);
  CHECK(toks[0].stop == 3);
  CHECK(toks[2].start == 10);
  CHECK(toks[2].stop == 11);
  CHECK(toks.back().start == 25);
}

TEST_CASE("tokenizer offsets count code points, not bytes") {
  auto toks = tokenize("café + thé", TokenizeMode::kFastqa);
  REQUIRE(toks.size() == 3);
  CHECK(toks[0].text == "café");
  CHECK(toks[0].stop == 4);
  CHECK(toks[1].text == "+");
  CHECK(toks[1].start == 5);
  CHECK(toks[2].text == "thé");
  CHECK(toks[2].start == 7);
  CHECK(toks[2].stop == 10);

  // hyphens split within words too
  auto dash = tokenize("1688-1692", TokenizeMode::kFastqa);
  REQUIRE(dash.size() == 3);
  CHECK(dash[0].text == "1688");
  CHECK(dash[1].text == "-");
  CHECK(dash[2].text == "1692");
}

TEST_CASE("bow tokenization lowercases ASCII but keeps the offsets") {
  auto toks = tokenize("The CAFÉ", TokenizeMode::kBow);
  REQUIRE(toks.size() == 2);
  CHECK(toks[0].text == "the");
  CHECK(toks[1].text == "cafÉ");  // only ASCII letters fold
  CHECK(toks[1].start == 4);
  CHECK(toks[1].stop == 8);
}

TEST_CASE("substr_cps extracts by code points and validates the range") {
  CHECK(substr_cps("café au lait", 0, 4) == "café");
  CHECK(substr_cps("café au lait", 5, 7) == "au");
  CHECK_THROWS_AS(substr_cps("abc", 1, 9), Error);
}

TEST_CASE("stopword list covers function words and skips content words") {
  for (const char* w : {"a", "an", "the", "of", "is", "was", "and"}) CHECK(is_stopword(w));
  for (const char* w : {"city", "wrote", "1776", "peace", "what"}) CHECK(!is_stopword(w));
  CHECK(is_alnum_token("abc12"));
  CHECK(!is_alnum_token("?"));
}

TEST_CASE("vocabulary reserves pad and unk, and its hash tracks content") {
  Vocabulary v;
  CHECK(v.word_count() == 2);
  CHECK(v.word_id("anything") == Vocabulary::kUnk);
  int64_t id = v.add_word("anything");
  CHECK(id == 2);
  CHECK(v.add_word("anything") == id);  // idempotent
  CHECK(v.word_id("anything") == id);

  Vocabulary w;
  w.add_word("something");
  CHECK(v.word_hash() != w.word_hash());
  Vocabulary v2;
  v2.add_word("anything");
  CHECK(v.word_hash() == v2.word_hash());

  v.add_char(U'x');
  CHECK(v.char_hash() != v2.char_hash());
}

TEST_CASE("embeddings loader parses rows and reports duplicates") {
  testutil::TempDir dir("emb");
  testutil::write_file(dir.file("v.txt"),
                       "alpha 1.0 2.0 3.0\n"
                       "beta -1 0.5 0\n"
                       "alpha 9 9 9\n");
  Embeddings emb = load_embeddings(dir.file("v.txt"));
  CHECK(emb.dim == 3);
  CHECK(emb.duplicates == 1);
  CHECK(emb.vocab.word_count() == 4);  // pad, unk, alpha, beta
  int64_t a = emb.vocab.word_id("alpha");
  CHECK(emb.table.data[size_t(a * 3)] == 1.0f);  // first occurrence wins
  CHECK(emb.table.data[size_t(emb.vocab.word_id("beta") * 3 + 1)] == 0.5f);
  // pad and unk rows stay zero
  CHECK(emb.table.data[0] == 0.0f);
  CHECK(emb.table.data[size_t(Vocabulary::kUnk * 3)] == 0.0f);

  CHECK_THROWS_AS(load_embeddings(dir.file("v.txt"), 5), Error);
  CHECK_THROWS_AS(load_embeddings(dir.file("missing.txt")), Error);
}

namespace {

const char* kTinySquad = R"({"data": [{"title": "t", "paragraphs": [
  {"context": "The city of Karlsruhe was founded in 1715 by Karl Wilhelm.",
   "qas": [
     {"id": "q1", "question": "When was Karlsruhe founded?",
      "answers": [{"text": "1715", "answer_start": 37}, {"text": "1715", "answer_start": 37}]},
     {"id": "q0", "question": "Who founded the city?",
      "answers": [{"text": "Karl Wilhelm", "answer_start": 45},
                  {"text": "not in the context", "answer_start": 500}]}
   ]}]}]})";

}  // namespace

TEST_CASE("squad ingest aligns character answers to token spans") {
  testutil::TempDir dir("ingest");
  testutil::write_file(dir.file("tiny.json"), kTinySquad);
  IngestStats stats;
  auto exs = ingest_squad(dir.file("tiny.json"), TokenizeMode::kFastqa, &stats);
  REQUIRE(exs.size() == 2);
  CHECK(exs[0].id == "q0");  // sorted by id
  CHECK(exs[1].id == "q1");
  CHECK(stats.examples == 2);
  CHECK(stats.answers == 4);
  CHECK(stats.answers_dropped == 1);  // out-of-range start
  CHECK(stats.examples_without_spans == 0);

  const auto& ex = exs[1];
  REQUIRE(ex.gold_spans.size() == 1);  // duplicate span collapsed
  CHECK(ex.span_text(ex.gold_spans[0]) == "1715");
  REQUIRE(exs[0].gold_spans.size() == 1);
  CHECK(exs[0].span_text(exs[0].gold_spans[0]) == "Karl Wilhelm");
  CHECK(exs[0].raw_answers.size() == 2);
}

TEST_CASE("examples cache round trips every field") {
  testutil::TempDir dir("cache");
  testutil::write_file(dir.file("tiny.json"), kTinySquad);
  auto exs = ingest_squad(dir.file("tiny.json"), TokenizeMode::kFastqa);
  Vocabulary vocab;
  for (auto& ex : exs) ex.assign_char_ids(vocab, true);

  save_examples_cache(dir.file("tiny.cache"), exs);
  auto back = load_examples_cache(dir.file("tiny.cache"));
  REQUIRE(back.size() == exs.size());
  for (size_t i = 0; i < exs.size(); ++i) {
    CHECK(back[i].id == exs[i].id);
    CHECK(back[i].question_tokens == exs[i].question_tokens);
    CHECK(back[i].context_tokens == exs[i].context_tokens);
    CHECK(back[i].gold_spans == exs[i].gold_spans);
    CHECK(back[i].raw_context == exs[i].raw_context);
    CHECK(back[i].raw_answers == exs[i].raw_answers);
    CHECK(back[i].question_chars == exs[i].question_chars);
    CHECK(back[i].context_chars == exs[i].context_chars);
    REQUIRE(back[i].context_char_spans.size() == exs[i].context_char_spans.size());
    for (size_t t = 0; t < exs[i].context_char_spans.size(); ++t)
      CHECK(back[i].context_char_spans[t] == exs[i].context_char_spans[t]);
  }

  CHECK_THROWS_AS(load_examples_cache(dir.file("absent.cache")), Error);
  testutil::write_file(dir.file("bad.cache"), "not a cache");
  CHECK_THROWS_AS(load_examples_cache(dir.file("bad.cache")), Error);
}

namespace {

TokenizedExample synthetic_example(int64_t length, const std::vector<Span>& golds) {
  TokenizedExample ex;
  ex.id = "syn";
  for (int64_t i = 0; i < length; ++i) ex.context_tokens.push_back("t" + std::to_string(i));
  ex.question_tokens = {"q"};
  ex.gold_spans = golds;
  return ex;
}

// Reference: try every window of max_len tokens, count fully contained golds,
// first window wins ties. Returns {best_start, best_count}.
std::pair<int64_t, int64_t> best_window(int64_t length, int64_t max_len,
                                        const std::vector<Span>& golds) {
  int64_t best_s = 0, best_c = -1;
  for (int64_t s = 0; s + max_len <= length; ++s) {
    int64_t c = 0;
    for (const auto& g : golds)
      if (g.start >= s && g.end < s + max_len) ++c;
    if (c > best_c) {
      best_c = c;
      best_s = s;
    }
  }
  return {best_s, best_c};
}

}  // namespace

TEST_CASE("cut_context picks the earliest window holding the most gold spans") {
  // short examples pass through untouched
  auto ex = synthetic_example(5, {{1, 2}});
  auto cut = cut_context(ex, 10);
  REQUIRE(cut.has_value());
  CHECK(cut->context_tokens.size() == 5);
  CHECK(cut->gold_spans == ex.gold_spans);

  // randomized layouts against the exhaustive reference
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    int64_t length = 12 + int64_t(rng() % 40);
    int64_t max_len = 6 + int64_t(rng() % 10);
    std::vector<Span> golds;
    int64_t n_golds = 1 + int64_t(rng() % 4);
    for (int64_t k = 0; k < n_golds; ++k) {
      int64_t s = int64_t(rng() % uint64_t(length));
      int64_t e = std::min<int64_t>(length - 1, s + int64_t(rng() % 8));
      golds.push_back({s, e});
    }
    auto sample = synthetic_example(length, golds);
    auto got = cut_context(sample, max_len);
    auto [want_s, want_c] = best_window(length, max_len, golds);
    INFO("trial ", trial, " length ", length, " max_len ", max_len);
    if (want_c == 0) {
      CHECK(!got.has_value());
      continue;
    }
    REQUIRE(got.has_value());
    CHECK(int64_t(got->context_tokens.size()) == max_len);
    CHECK(got->context_tokens.front() == "t" + std::to_string(want_s));
    CHECK(int64_t(got->gold_spans.size()) == want_c);
    for (const auto& g : got->gold_spans) {
      CHECK(g.start >= 0);
      CHECK(g.end < max_len);
      // re-indexed spans still point at the same tokens
      CHECK(got->context_tokens[size_t(g.start)] == "t" + std::to_string(g.start + want_s));
    }
  }
}
