#include <cmath>
#include <random>

#include "doctest.h"

#include "fastqa/bow.hpp"
#include "fastqa/wiq.hpp"

using namespace fastqa;
using namespace fastqa::ad;

TEST_CASE("lat extraction follows the what/which then question-word ladder") {
  auto lat = extract_lat({"What", "city", "was", "founded", "?"});
  CHECK(lat.kind == LatKind::kAfterWhatWhich);
  CHECK(lat.start == 1);
  CHECK(lat.end == 1);  // "was" ends the content run

  // function words after what/which are skipped before the run starts
  lat = extract_lat({"Which", "of", "the", "following", "cities", "grew", "?"});
  CHECK(lat.kind == LatKind::kAfterWhatWhich);
  CHECK(lat.start == 3);
  CHECK(lat.end == 5);  // three consecutive content tokens, capped

  lat = extract_lat({"Who", "wrote", "it", "?"});
  CHECK(lat.kind == LatKind::kQuestionWord);
  CHECK(lat.start == 0);
  CHECK(lat.end == 0);

  lat = extract_lat({"How", "many", "people", "live", "there", "?"});
  CHECK(lat.kind == LatKind::kQuestionWord);
  CHECK(lat.start == 0);
  CHECK(lat.end == 1);  // "how many" kept together

  lat = extract_lat({"Name", "the", "river", "."});
  CHECK(lat.kind == LatKind::kFallback);
  CHECK(lat.start == 0);
  CHECK(lat.end == 0);

  // "what" with only stopwords after it falls through to the other rules
  lat = extract_lat({"What", "is", "it", "for"});
  CHECK(lat.kind == LatKind::kFallback);
  CHECK(lat.start == 0);
}

TEST_CASE("span enumeration is (s, e) ordered with bounded length") {
  auto spans = enumerate_spans(4, 2);
  std::vector<Span> want = {{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}, {2, 3}, {3, 3}};
  REQUIRE(spans.size() == want.size());
  for (size_t i = 0; i < want.size(); ++i) CHECK(spans[i] == want[i]);

  // L * max_len minus the triangle that falls off the end
  auto all = enumerate_spans(30, 10);
  CHECK(all.size() == size_t(30 * 10 - 9 * 10 / 2));
  for (size_t i = 1; i < all.size(); ++i) {
    bool ordered = all[i - 1].start < all[i].start ||
                   (all[i - 1].start == all[i].start && all[i - 1].end < all[i].end);
    CHECK(ordered);
  }
}

namespace {

struct BowFixture {
  int64_t n = 4, d = 3, L = 6, Q = 3;
  BowParamsT<double> p;
  Tensor64 ctx, q;
  std::vector<float> wiq_b;
  LatSpan lat;
  std::vector<Span> spans;

  BowFixture() : p(init_bow<double>(n, d, 11)) {
    std::mt19937_64 rng(21);
    ctx = uniform<double>({L, d}, rng, -1, 1);
    q = uniform<double>({Q, d}, rng, -1, 1);
    wiq_b = {1, 0, 0, 1, 0, 0};
    lat = {0, 1, LatKind::kAfterWhatWhich};
    spans = enumerate_spans(L, 3);
  }
};

}  // namespace

TEST_CASE("bow scores align with the span list and the loss matches a manual form") {
  BowFixture f;
  Graph64 g;
  auto scores = bow_span_scores(g, f.p, g.constant(f.ctx), g.constant(f.q), f.wiq_b, f.lat,
                                f.spans);
  const auto& total = g.value(scores.total);
  REQUIRE(total.shape == Shape{int64_t(f.spans.size())});
  const auto& type = g.value(scores.type);
  const auto& ctxt = g.value(scores.ctxt);
  for (size_t i = 0; i < f.spans.size(); ++i)
    CHECK(total.data[i] == doctest::Approx(type.data[i] + ctxt.data[i]).epsilon(1e-12));

  // loss = lse(all) - lse(golds); single gold reduces to cross entropy
  std::vector<int64_t> golds = {2};
  Var loss = bow_loss(g, scores.total, golds);
  double lse_all = 0;
  {
    double mx = *std::max_element(total.data.begin(), total.data.end());
    double acc = 0;
    for (double s : total.data) acc += std::exp(s - mx);
    lse_all = mx + std::log(acc);
  }
  CHECK(g.value(loss).scalar() == doctest::Approx(lse_all - total.data[2]).epsilon(1e-10));

  // two golds marginalize inside the log, so the loss can only go down
  Var loss2 = bow_loss(g, scores.total, {2, 5});
  CHECK(g.value(loss2).scalar() < g.value(loss).scalar());

  CHECK_THROWS_AS(bow_loss(g, scores.total, {}), Error);
}

TEST_CASE("bow argmax takes the first span on exact ties") {
  Graph64 g;
  Var flat = g.constant(Tensor64({4}, {1.0, 7.0, 7.0, 3.0}));
  CHECK(bow_argmax(g, flat) == 1);
}

TEST_CASE("window weights start uniform and the context score reacts to wiq") {
  BowFixture f;
  CHECK(f.p.window_weights.shape == Shape{12});
  for (double w : f.p.window_weights.data) CHECK(w == doctest::Approx(0.1));

  // zeroing the binary feature changes the context score but not the type score
  Graph64 g;
  auto a = bow_span_scores(g, f.p, g.constant(f.ctx), g.constant(f.q), f.wiq_b, f.lat, f.spans);
  std::vector<float> none(f.wiq_b.size(), 0.0f);
  auto b = bow_span_scores(g, f.p, g.constant(f.ctx), g.constant(f.q), none, f.lat, f.spans);
  const auto ta = g.value(a.type).data, tb = g.value(b.type).data;
  for (size_t i = 0; i < ta.size(); ++i) CHECK(ta[i] == doctest::Approx(tb[i]).epsilon(1e-12));
  bool ctxt_differs = false;
  const auto ca = g.value(a.ctxt).data, cb = g.value(b.ctxt).data;
  for (size_t i = 0; i < ca.size(); ++i)
    if (std::abs(ca[i] - cb[i]) > 1e-9) ctxt_differs = true;
  CHECK(ctxt_differs);
}
