#include "doctest.h"

#include "fastqa/grad_check.hpp"

using namespace fastqa::ad;

TEST_CASE("gradient battery: primitives") {
  for (const auto& c : gradcheck_battery_ops(42)) {
    INFO(c.name, " worst=", c.result.worst, " err=", c.result.max_rel_err);
    CHECK(c.result.checked > 0);
    CHECK(c.result.ok(1e-5));
  }
}

TEST_CASE("gradient battery: assembled models") {
  for (const auto& c : gradcheck_battery_models(42)) {
    INFO(c.name, " worst=", c.result.worst, " err=", c.result.max_rel_err);
    CHECK(c.result.checked > 0);
    CHECK(c.result.ok(1e-5));
  }
}

TEST_CASE("gradient battery rejects degenerate widths") {
  CHECK_THROWS_AS(gradcheck_battery_models(1, 1), fastqa::Error);
}
