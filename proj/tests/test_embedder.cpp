#include <random>

#include "doctest.h"

#include "fastqa/embedder.hpp"

using namespace fastqa;
using namespace fastqa::ad;

namespace {

Tensor64 toy_table() {
  // pad, unk, then two real rows
  return Tensor64({4, 3}, {0, 0, 0, 9, 9, 9, 1, 2, 3, 4, 5, 6});
}

}  // namespace

TEST_CASE("embed_tokens maps ids to rows") {
  EmbedderConfig cfg;
  auto p = init_embedder<double>(toy_table(), 0, cfg, 1);
  CHECK(p.word_dim() == 3);
  CHECK(p.out_dim() == 3);
  Graph64 g;
  Var table = g.constant(p.E);
  Var out = embed_tokens(g, p, table, {2, 3, 2}, {});
  CHECK(g.value(out).shape == Shape{3, 3});
  CHECK(g.value(out).data == std::vector<double>{1, 2, 3, 4, 5, 6, 1, 2, 3});

  // ids past the table clamp to the unknown row
  Var oob = embed_tokens(g, p, table, {99, -1}, {});
  CHECK(g.value(oob).data == std::vector<double>{9, 9, 9, 9, 9, 9});
}

TEST_CASE("char path widens the embedding and respects max_chars") {
  EmbedderConfig cfg;
  cfg.use_chars = true;
  cfg.c_dim = 6;
  cfg.char_out_dim = 5;
  cfg.max_chars = 4;
  auto p = init_embedder<double>(toy_table(), 10, cfg, 1);
  CHECK(p.out_dim() == 3 + 5);
  CHECK(p.char_table.shape == Shape{10, 6});
  CHECK(p.conv_kernel.shape == Shape{6, 5, 5});

  Graph64 g;
  Var table = g.constant(p.E);
  std::vector<std::vector<int64_t>> chars = {{2, 3, 4}, {5, 6, 7, 8, 9, 2, 3}};
  Var out = embed_tokens(g, p, table, {2, 3}, chars);
  REQUIRE(g.value(out).shape == Shape{2, 8});
  // the word half is still the plain lookup
  CHECK(g.value(out).data[0] == 1.0);
  CHECK(g.value(out).data[1] == 2.0);
  CHECK(g.value(out).data[2] == 3.0);

  // truncation: tokens agreeing on the first max_chars chars embed identically
  std::vector<std::vector<int64_t>> same_prefix = {{5, 6, 7, 8}, {5, 6, 7, 8, 2, 2}};
  Var out2 = embed_tokens(g, p, table, {2, 2}, same_prefix);
  const auto& v = g.value(out2);
  for (int64_t j = 3; j < 8; ++j)
    CHECK(v.data[size_t(j)] == doctest::Approx(v.data[size_t(8 + j)]).epsilon(1e-12));
}

TEST_CASE("word_ids_for resolves through the vocabulary") {
  Vocabulary v;
  v.add_word("alpha");
  v.add_word("beta");
  auto ids = word_ids_for(v, {"beta", "missing", "alpha"});
  CHECK(ids == std::vector<int64_t>{3, Vocabulary::kUnk, 2});
}
