#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <limits>

#include "lmtp/policy.hpp"
#include "test_util.hpp"

using namespace lmtp;

TEST_CASE("unbounded shift lowers exposure by one") {
  CHECK(Policy::shift(-1.0).apply(5.0, {}, 0) == 4.0);
}

TEST_CASE("bounded shift leaves exposure when the shifted value falls below the bound") {
  const Policy p = Policy::bounded_shift(-2.0, ConstantBound{3.0});
  CHECK(p.apply(4.0, {}, 0, 3.0) == 4.0);
  CHECK(p.apply(6.0, {}, 0, 3.0) == 4.0);
  CHECK(p.apply(5.0, {}, 0, 3.0) == 3.0);  // a - delta == u is shifted
  CHECK_THROWS_AS(p.apply(6.0, {}, 0), Error);
}

TEST_CASE("identity returns the exposure") {
  CHECK(Policy::identity().apply(7.25, {}, 0) == 7.25);
}

TEST_CASE("is_identity follows the declared variant") {
  CHECK(Policy::identity().is_identity());
  CHECK_FALSE(Policy::shift(0.0).is_identity());
  CHECK_FALSE(Policy::threshold(-std::numeric_limits<double>::infinity()).is_identity());
}

TEST_CASE("threshold raises exposure to the floor") {
  const Policy p = Policy::threshold(2.0);
  CHECK(p.apply(1.0, {}, 0) == 2.0);
  CHECK(p.apply(3.0, {}, 0) == 3.0);
}

TEST_CASE("parse_policy accepts the documented syntax") {
  CHECK(parse_policy("identity").is_identity());
  CHECK(parse_policy("shift:-1").apply(5.0, {}, 0) == 4.0);
  CHECK(parse_policy("threshold:2.5").apply(1.0, {}, 0) == 2.5);
  const Policy b = parse_policy("shift:-2,bound=3");
  CHECK(b.needs_bound());
  CHECK(b.apply(4.0, {}, 0, 3.0) == 4.0);
  const Policy c = parse_policy("shift:-1,bound=L{t}_2");
  CHECK(c.depends_on_history());
  for (const char* bad : {"", "shift", "shift:x", "shift:1,foo=2", "shift:1,bound=L{t}_0", "warp:1", "threshold:"})
    CHECK_THROWS_AS(parse_policy(bad), Error);
}

TEST_CASE("intervene resolves covariate and callback bounds per row") {
  std::mt19937_64 rng(11);
  const LongitudinalDataset d = testutil::random_dataset(rng, 40, 2, 2);
  const Policy by_cov = Policy::bounded_shift(-0.5, CovariateBound{1});
  const VectorXd out = by_cov.intervene(d, 1);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double a = d.exposures()(i, 1), u = d.covariates(1)(i, 1);
    CHECK(out(i) == (a - 0.5 >= u ? a - 0.5 : a));
  }
  // The callback sees the flattened history row: here the first entry is A_0.
  const Policy by_fn = Policy::bounded_shift(
      -0.5, CallbackBound{[](std::span<const double> h, int) { return h[0]; }}, "cb");
  const VectorXd out2 = by_fn.intervene(d, 1);
  for (Eigen::Index i = 0; i < out2.size(); ++i) {
    const double a = d.exposures()(i, 1), u = d.exposures()(i, 0);
    CHECK(out2(i) == (a - 0.5 >= u ? a - 0.5 : a));
  }
  CHECK_THROWS_AS(Policy::bounded_shift(-1.0, CovariateBound{5}).intervene(d, 0), Error);
}

TEST_CASE("custom policy returning a non-finite value is a policy error") {
  std::mt19937_64 rng(12);
  const LongitudinalDataset d = testutil::random_dataset(rng, 10, 1, 1);
  const Policy p = Policy::custom([](double, std::span<const double>, int) { return std::nan(""); }, false, "bad");
  try {
    p.intervene(d, 0);
    FAIL("expected a policy error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::policy);
  }
}
