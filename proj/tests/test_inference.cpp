#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <random>

#include "lmtp/inference.hpp"
#include "lmtp/sdr.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace lmtp;

namespace {

// Contrast result with correlation r and the given standardized statistics.
ContrastResult with_statistics(const MatrixXd& r, const VectorXd& t) {
  return contrast_estimate(t, r, MatrixXd::Identity(r.rows(), r.rows()));
}

StackedEstimate identity_pair(const LongitudinalDataset& d) {
  return estimate_pair(d, Policy::identity(), Policy::identity(), default_sdr_config(1));
}

}  // namespace

TEST_CASE("two time points baseline contrast") {
  MatrixXd expected(1, 4);
  expected << 1, -1, -1, 1;
  CHECK(build_contrast(ContrastKind::baseline, 2).K == expected);
}

TEST_CASE("three time points adjacent contrast") {
  MatrixXd expected(2, 6);
  expected << 1, -1, 0, -1, 1, 0, 0, 1, -1, 0, -1, 1;
  CHECK(build_contrast(ContrastKind::adjacent, 3).K == expected);
}

TEST_CASE("cumulative sums map adjacent rows to baseline rows") {
  for (int tau = 2; tau <= 7; ++tau) {
    const MatrixXd a = MatrixXd::Ones(tau - 1, tau - 1).triangularView<Eigen::Lower>();
    CHECK(a * build_contrast(ContrastKind::adjacent, tau).K == build_contrast(ContrastKind::baseline, tau).K);
  }
}

TEST_CASE("custom contrasts are validated") {
  CHECK_THROWS_AS(custom_contrast(MatrixXd::Ones(1, 5), 3), Error);
  CHECK_THROWS_AS(custom_contrast(MatrixXd::Zero(1, 6), 3), Error);
  CHECK_NOTHROW(custom_contrast(MatrixXd::Ones(2, 6), 3));

  testutil::TempDir dir("lmtp_contrast");
  {
    std::ofstream f(dir / "k.txt");
    f << "# two rows\n1 0 -1 0\n0, 1, 0, -1\n";
  }
  const ContrastMatrix k = load_contrast((dir / "k.txt").string(), 2);
  CHECK(k.rows() == 2);
  CHECK(k.K(1, 3) == -1.0);
  {
    std::ofstream f(dir / "bad.txt");
    f << "1 0 x 0\n";
  }
  CHECK_THROWS_AS(load_contrast((dir / "bad.txt").string(), 2), Error);
}

TEST_CASE("constant EIF columns give a zero covariance") {
  const MatrixXd eif = MatrixXd::Constant(10, 4, 3.0);
  CHECK(empirical_covariance(eif) == MatrixXd::Zero(4, 4));
}

TEST_CASE("identity policies give the outcome covariance over n") {
  std::mt19937_64 rng(1);
  const LongitudinalDataset d = testutil::random_dataset(rng, 80, 3, 1);
  const MatrixXd s = empirical_covariance(identity_pair(d));
  const MatrixXd c = oracle::sample_covariance(d.outcomes()) / 80.0;
  CHECK((s.topLeftCorner(3, 3) - c).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((s.bottomRightCorner(3, 3) - c).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((s.topRightCorner(3, 3) - c).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("duplicated EIF columns have unit correlation") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  MatrixXd eif(50, 3);
  eif.col(0) = VectorXd::NullaryExpr(50, [&] { return z(rng); });
  eif.col(1) = VectorXd::NullaryExpr(50, [&] { return z(rng); });
  eif.col(2) = eif.col(0);
  const ContrastResult r = contrast_estimate(column_means(eif), empirical_covariance(eif), MatrixXd::Identity(3, 3));
  CHECK(r.R_star(0, 2) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.R_star.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("selecting the first identity coordinate gives its sample moments") {
  std::mt19937_64 rng(3);
  const LongitudinalDataset d = testutil::random_dataset(rng, 60, 2, 1);
  MatrixXd k = MatrixXd::Zero(1, 4);
  k(0, 0) = 1.0;
  const ContrastResult r = contrast_estimate(identity_pair(d), custom_contrast(k, 2));
  CHECK(r.nu_hat(0) == doctest::Approx(d.outcome(0).mean()).epsilon(1e-14));
  const double var = oracle::sample_covariance(d.outcomes())(0, 0) / 60.0;
  CHECK(r.S_star(0, 0) == doctest::Approx(var).epsilon(1e-12));
}

TEST_CASE("centring at the estimate gives zero statistics") {
  std::mt19937_64 rng(4);
  const LongitudinalDataset d = testutil::random_dataset(rng, 60, 3, 1);
  const StackedEstimate s = estimate_pair(d, Policy::identity(), Policy::shift(0.5), default_sdr_config(2));
  const ContrastMatrix k = build_contrast(ContrastKind::baseline, 3);
  const ContrastResult first = contrast_estimate(s, k);
  const ContrastResult centred = contrast_estimate(s, k, first.nu_hat);
  CHECK(centred.t_star.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scaling a contrast row leaves its statistic unchanged") {
  std::mt19937_64 rng(5);
  const LongitudinalDataset d = testutil::random_dataset(rng, 70, 3, 1);
  const StackedEstimate s = estimate_pair(d, Policy::identity(), Policy::shift(0.5), default_sdr_config(3));
  ContrastMatrix k = build_contrast(ContrastKind::baseline, 3);
  const ContrastResult a = contrast_estimate(s, k);
  k.K.row(1) *= 3.7;
  const ContrastResult b = contrast_estimate(s, k);
  CHECK(b.t_star(1) == doctest::Approx(a.t_star(1)).epsilon(1e-12));
  CHECK(b.t_star(0) == a.t_star(0));
}

TEST_CASE("zero-variance contrast is an estimation error") {
  const MatrixXd cov = MatrixXd::Zero(2, 2);
  try {
    contrast_estimate(VectorXd::Ones(2), cov, MatrixXd::Identity(2, 2));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::estimation);
  }
}

TEST_CASE("Wald test for one contrast") {
  VectorXd t(1);
  t << 1.959964;
  const WaldResult w = wald_test(with_statistics(MatrixXd::Identity(1, 1), t));
  CHECK(w.statistic == doctest::Approx(3.8415).epsilon(1e-4));
  CHECK(std::abs(w.p - 0.05) <= 1e-4);
  CHECK(w.df == 1);
}

TEST_CASE("Wald test at zero and under independence") {
  const WaldResult zero = wald_test(with_statistics(MatrixXd::Identity(3, 3), VectorXd::Zero(3)));
  CHECK(zero.statistic == 0.0);
  CHECK(zero.p == 1.0);
  VectorXd t(2);
  t << 1.3, -0.4;
  const WaldResult w = wald_test(with_statistics(MatrixXd::Identity(2, 2), t));
  CHECK(w.statistic == 1.3 * 1.3 + 0.4 * 0.4);
  CHECK(w.p == doctest::Approx(1.0 - oracle::chisq_cdf(w.statistic, 2)).epsilon(1e-10));
}

TEST_CASE("Wald test handles a singular correlation by jitter") {
  MatrixXd r = MatrixXd::Ones(2, 2);
  VectorXd t(2);
  t << 2.0, 2.0;
  const WaldResult w = wald_test(with_statistics(r, t));
  CHECK(std::isfinite(w.statistic));
  CHECK(w.jitter > 0.0);
  CHECK(w.statistic == doctest::Approx(4.0).epsilon(1e-3));
}

TEST_CASE("max test in one dimension is the two-sided normal test") {
  VectorXd t(1);
  t << 1.959964;
  const MaxTestResult m = max_test(with_statistics(MatrixXd::Identity(1, 1), t), 0.05);
  CHECK(std::abs(m.p - 2.0 * (1.0 - oracle::normal_cdf(1.959964))) <= 1e-6);
  CHECK(std::abs(m.p - 0.05) <= 1e-4);
}

TEST_CASE("max test under independence") {
  VectorXd t(3);
  t << 0.5, -2.0, 1.0;
  const MaxTestResult m = max_test(with_statistics(MatrixXd::Identity(3, 3), t), 0.05);
  CHECK(std::abs(m.p - (1.0 - std::pow(2.0 * oracle::normal_cdf(2.0) - 1.0, 3))) <= 2e-4);
  CHECK(m.statistic == 2.0);
}

TEST_CASE("equicorrelated max test matches plain Monte Carlo") {
  MatrixXd r = MatrixXd::Constant(4, 4, 0.5);
  r.diagonal().setOnes();
  VectorXd t(4);
  t << 2.2, 0.1, -1.0, 0.4;
  const MaxTestResult m = max_test(with_statistics(r, t), 0.05);
  const auto mc = oracle::naive_rect_prob(2.2, r, 10'000'000, 17);
  CHECK(std::abs(m.p - (1.0 - mc.estimate)) <= 3.0 * std::hypot(m.mc_error, mc.std_error));
}

TEST_CASE("with one contrast all adjustments coincide") {
  VectorXd t(1);
  t << -1.7;
  const ContrastResult c = with_statistics(MatrixXd::Identity(1, 1), t);
  const double u = local_tests(c, Adjustment::unadjusted)[0];
  CHECK(local_tests(c, Adjustment::bonferroni)[0] == u);
  CHECK(std::abs(local_tests(c, Adjustment::max)[0] - u) <= 1e-6);
  const auto ci_u = simultaneous_ci(c, 0.05, Adjustment::unadjusted);
  const auto ci_b = simultaneous_ci(c, 0.05, Adjustment::bonferroni);
  const auto ci_m = simultaneous_ci(c, 0.05, Adjustment::max);
  CHECK(ci_u[0].lower == ci_b[0].lower);
  CHECK(ci_u[0].upper == ci_b[0].upper);
  CHECK(ci_m[0].lower == doctest::Approx(ci_u[0].lower).epsilon(1e-5));
  CHECK(ci_m[0].upper == doctest::Approx(ci_u[0].upper).epsilon(1e-5));
}

TEST_CASE("max-adjusted local p-values factorize under independence") {
  VectorXd t(4);
  t << 0.3, -2.4, 1.1, 1.9;
  const auto p = local_tests(with_statistics(MatrixXd::Identity(4, 4), t), Adjustment::max);
  for (int j = 0; j < 4; ++j) CHECK(std::abs(p[j] - (1.0 - std::pow(2.0 * oracle::normal_cdf(std::abs(t(j))) - 1.0, 4))) <= 2e-4);
}

TEST_CASE("local p-values are ordered unadjusted <= max <= Bonferroni") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z(0.0, 1.5);
  for (int rep = 0; rep < 100; ++rep) {
    const int k = 2 + rep % 7;
    const MatrixXd r = oracle::random_correlation(k, rng);
    const VectorXd t = VectorXd::NullaryExpr(k, [&] { return z(rng); });
    const ContrastResult c = with_statistics(r, t);
    MvnConfig cfg;
    cfg.seed = 700 + rep;
    cfg.max_points = 1 << 12;  // the tolerance scales with the reported MC error
    const MaxProcedure proc(c, 0.05, cfg);
    const double tol = 3.0 * proc.global().mc_error;
    const auto pu = local_tests(c, Adjustment::unadjusted);
    const auto pb = local_tests(c, Adjustment::bonferroni);
    for (int j = 0; j < k; ++j) {
      CHECK(pu[j] <= proc.local_p(j) + tol);
      CHECK(proc.local_p(j) <= pb[j] + tol);
      CHECK(proc.global().p <= proc.local_p(j));
    }
  }
}

TEST_CASE("interval widths are ordered pointwise <= max <= Bonferroni") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const int k = 2 + rep % 6;
    const MatrixXd r = oracle::random_correlation(k, rng);
    const ContrastResult c = with_statistics(r, VectorXd::Zero(k));
    MvnConfig cfg;
    cfg.max_points = 1 << 12;
    const auto u = simultaneous_ci(c, 0.05, Adjustment::unadjusted);
    const auto m = simultaneous_ci(c, 0.05, Adjustment::max, cfg);
    const auto b = simultaneous_ci(c, 0.05, Adjustment::bonferroni);
    for (int j = 0; j < k; ++j) {
      const double wu = u[j].upper - u[j].lower, wm = m[j].upper - m[j].lower, wb = b[j].upper - b[j].lower;
      CHECK(wu <= wm + 1e-3);
      CHECK(wm <= wb + 1e-3);
    }
  }
}

TEST_CASE("global and local max decisions agree") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z(0.0, 2.0);
  for (int rep = 0; rep < 40; ++rep) {
    const int k = 2 + rep % 5;
    const ContrastResult c = with_statistics(oracle::random_correlation(k, rng), VectorXd::NullaryExpr(k, [&] { return z(rng); }));
    MvnConfig cfg;
    cfg.max_points = 1 << 12;
    const MaxProcedure proc(c, 0.05, cfg);
    double smallest = 1.0;
    for (int j = 0; j < k; ++j) smallest = std::min(smallest, proc.local_p(j));
    CHECK(smallest == proc.global().p);
  }
}

TEST_CASE("identical policies give a degenerate report") {
  std::mt19937_64 rng(9);
  const LongitudinalDataset d = testutil::random_dataset(rng, 50, 3, 1);
  const StackedEstimate s = identity_pair(d);
  CHECK(identical_trajectories(s));
  const InferenceReport r = infer(s, build_contrast(ContrastKind::baseline, 3), 0.05);
  CHECK(r.degenerate);
  CHECK(r.contrast.nu_hat == VectorXd::Zero(2));
  CHECK(r.wald.p == 1.0);
  CHECK(r.max.p == 1.0);
  for (const auto& l : r.locals) {
    CHECK(l.p_unadjusted == 1.0);
    CHECK(l.p_bonferroni == 1.0);
    CHECK(l.p_max == 1.0);
  }
}

TEST_CASE("full report is internally consistent") {
  std::mt19937_64 rng(10);
  const LongitudinalDataset d = testutil::random_dataset(rng, 200, 4, 1);
  const StackedEstimate s = estimate_pair(d, Policy::identity(), Policy::shift(1.0), default_sdr_config(4));
  const InferenceReport r = infer(s, build_contrast(ContrastKind::baseline, 4), 0.05);
  CHECK_FALSE(r.degenerate);
  REQUIRE(r.locals.size() == 3);
  const double zb = oracle::normal_quantile(1.0 - 0.05 / 6.0);
  for (const auto& l : r.locals) {
    CHECK(l.estimate == r.contrast.nu_hat(l.j));
    CHECK(l.se == doctest::Approx(std::sqrt(r.contrast.S_star(l.j, l.j))).epsilon(1e-14));
    CHECK(l.ci_bonferroni.upper == doctest::Approx(l.estimate + zb * l.se).epsilon(1e-10));
    CHECK(l.ci_max.upper == doctest::Approx(l.estimate + r.max.q * l.se).epsilon(1e-12));
    CHECK(l.p_bonferroni == doctest::Approx(std::min(1.0, 3.0 * l.p_unadjusted)).epsilon(1e-14));
  }
}

TEST_CASE("max quantile is nonincreasing in alpha") {
  std::mt19937_64 rng(11);
  const MatrixXd r = oracle::random_correlation(4, rng);
  const ContrastResult c = with_statistics(r, VectorXd::Zero(4));
  const double q10 = max_test(c, 0.10).q, q05 = max_test(c, 0.05).q, q01 = max_test(c, 0.01).q;
  CHECK(q10 <= q05);
  CHECK(q05 <= q01);
}

TEST_CASE("one-contrast Wald statistic is the squared standardized estimate") {
  for (double t : {-3.1, 0.2, 1.7}) {
    VectorXd v(1);
    v << t;
    CHECK(std::abs(wald_test(with_statistics(MatrixXd::Identity(1, 1), v)).statistic - t * t) <= 1e-12);
  }
}

TEST_CASE("correlation of a real contrast has a unit diagonal") {
  std::mt19937_64 rng(12);
  const LongitudinalDataset d = testutil::random_dataset(rng, 150, 4, 2);
  const StackedEstimate s = estimate_pair(d, Policy::identity(), Policy::shift(-0.5), default_sdr_config(5));
  const ContrastResult c = contrast_estimate(s, build_contrast(ContrastKind::adjacent, 4));
  CHECK((c.R_star.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-10);
  CHECK(c.R_star.cwiseAbs().maxCoeff() <= 1.0);
}
