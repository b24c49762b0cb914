#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "lmtp/sdr.hpp"
#include "lmtp/simulation.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace lmtp;

namespace {

SdrConfig linear_config(std::uint64_t seed) {
  LearnerSettings s;
  s.regression_learners = {"ols"};
  s.classification_learners = {"logistic"};
  return make_sdr_config(s, 5, seed);
}

// Gaussian exposure given one covariate: L ~ N(0, 1), A ~ N(mu(L), 1) with mu = 0.5 L.
LongitudinalDataset gaussian_exposure(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  MatrixXd l(n, 1), a(n, 1), y(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    l(i, 0) = z(rng);
    a(i, 0) = 0.5 * l(i, 0) + z(rng);
    y(i, 0) = a(i, 0) + l(i, 0) + z(rng);
  }
  return LongitudinalDataset({l}, a, y);
}

// Ratio of exactly one and arbitrary regressions: every term telescopes.
class CorruptedNuisance final : public NuisanceEstimator {
 public:
  RatioEstimate ratio(const LongitudinalDataset& data, const Policy&, int) const override {
    return {VectorXd::Ones(static_cast<Eigen::Index>(data.n())), 0, {}};
  }
  RegressionPredictions regress(const LongitudinalDataset& data, const Policy&, int s, int t,
                                const VectorXd&) const override {
    std::mt19937_64 rng(static_cast<std::uint64_t>(100 * s + t));
    std::normal_distribution<double> z(0.0, 50.0);
    const VectorXd junk = VectorXd::NullaryExpr(static_cast<Eigen::Index>(data.n()), [&] { return z(rng); });
    return {junk, junk, {}};
  }
};

}  // namespace

TEST_CASE("identity ratio is one up to clipping") {
  const LongitudinalDataset d = gaussian_exposure(2000, 1);
  const SdrConfig c = default_sdr_config(4);
  const RatioEstimate r = estimate_ratio(d, Policy::identity(), 0, *c.classifier, sdr_folds(d.n(), c), c.ratio_p_min);
  CHECK((r.ratio.array() - 1.0).abs().maxCoeff() <= 0.05);
}

TEST_CASE("shift ratio tracks the closed-form Gaussian ratio") {
  const LongitudinalDataset d = gaussian_exposure(5000, 2);
  const SdrConfig c = default_sdr_config(5);
  const RatioEstimate r = estimate_ratio(d, Policy::shift(-1.0), 0, *c.classifier, sdr_folds(d.n(), c), c.ratio_p_min);
  std::vector<double> rel;
  for (Eigen::Index i = 0; i < r.ratio.size(); ++i) {
    const double truth = oracle::gaussian_shift_ratio(d.exposures()(i, 0), 0.5 * d.covariates(0)(i, 0), -1.0);
    rel.push_back(std::abs(r.ratio(i) - truth) / truth);
  }
  std::nth_element(rel.begin(), rel.begin() + rel.size() / 2, rel.end());
  CHECK(rel[rel.size() / 2] <= 0.15);
}

TEST_CASE("extreme separation keeps ratios inside the clip interval") {
  const LongitudinalDataset d = gaussian_exposure(500, 3);
  const SdrConfig c = linear_config(6);
  const double p = c.ratio_p_min;
  const RatioEstimate r = estimate_ratio(d, Policy::shift(100.0), 0, *c.classifier, sdr_folds(d.n(), c), p);
  CHECK(r.ratio.minCoeff() >= p / (1.0 - p) * (1.0 - 1e-12));
  CHECK(r.ratio.maxCoeff() <= (1.0 - p) / p * (1.0 + 1e-12));
  CHECK(r.clipped > 0);
}

TEST_CASE("identity EIF equals the outcome regardless of the regressions") {
  std::mt19937_64 rng(7);
  const LongitudinalDataset d = testutil::random_dataset(rng, 120, 4, 2);
  const TrajectoryEstimate est = estimate_trajectory_general(d, Policy::identity(), CorruptedNuisance{});
  CHECK((est.eif - d.outcomes()).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((est.theta - column_means(d.outcomes())).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("identity trajectory is exactly the outcome means") {
  std::mt19937_64 rng(8);
  const LongitudinalDataset d = testutil::random_dataset(rng, 90, 3, 1);
  const TrajectoryEstimate est = estimate_trajectory(d, Policy::identity(), default_sdr_config(1));
  CHECK(est.eif == d.outcomes());
  CHECK(est.theta == column_means(d.outcomes()));
}

TEST_CASE("single time point reproduces a direct one-step estimator") {
  std::mt19937_64 rng(9);
  const LongitudinalDataset d = testutil::random_dataset(rng, 300, 1, 2);
  const SdrConfig c = linear_config(10);
  const Policy pol = Policy::shift(0.7);
  const TrajectoryEstimate est = estimate_trajectory(d, pol, c);
  REQUIRE(est.theta.size() == 1);

  const auto n = static_cast<Eigen::Index>(d.n());
  const FoldAssignment folds = sdr_folds(d.n(), c);
  MatrixXd xn(n, 3), xi(n, 3);
  xn << d.exposure(0), d.covariates(0);
  xi << (d.exposure(0).array() + 0.7).matrix(), d.covariates(0);
  MatrixXd x2(2 * n, 3);
  x2 << xn, xi;
  VectorXd lab(2 * n);
  lab << VectorXd::Zero(n), VectorXd::Ones(n);
  std::vector<int> id(2 * n);
  for (Eigen::Index i = 0; i < 2 * n; ++i) id[i] = static_cast<int>(i % n);
  const VectorXd prob = crossfit(x2, lab, id, *c.classifier, folds).predict(xn);
  const VectorXd q = prob.cwiseMax(c.ratio_p_min).cwiseMin(1.0 - c.ratio_p_min);
  const VectorXd ratio = q.array() / (1.0 - q.array());
  const CrossFit m = crossfit(xn, d.outcome(0), *c.regression, folds);
  const VectorXd direct = oracle::aipw(d.outcome(0), ratio, m.predict(xn), m.predict(xi));
  CHECK((est.eif.col(0) - direct).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("assemble_eif agrees with the backward recursion") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> z;
  const Eigen::Index n = 25;
  const int t = 2;
  const VectorXd y = VectorXd::NullaryExpr(n, [&] { return z(rng); });
  const MatrixXd nat = MatrixXd::NullaryExpr(n, t + 1, [&] { return z(rng); });
  const MatrixXd inter = MatrixXd::NullaryExpr(n, t + 1, [&] { return z(rng); });
  const MatrixXd r = MatrixXd::NullaryExpr(n, t + 1, [&] { return std::exp(0.3 * z(rng)); });
  VectorXd pseudo = y;
  for (int s = t; s >= 0; --s)
    pseudo = (r.col(s).array() * (pseudo - nat.col(s)).array()).matrix() + inter.col(s);
  CHECK((assemble_eif(y, nat, inter, r) - pseudo).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("pair estimates share the identity block and have consistent means") {
  const DgpParams p = study_params(1.0);
  const LongitudinalDataset d = generate(p, 300, 5);
  const StackedEstimate s = estimate_pair(d, Policy::identity(), Policy::shift(-1.0), linear_config(3));
  CHECK(s.theta.head(4) == column_means(d.outcomes()));
  CHECK((column_means(s.eif) - s.theta).cwiseAbs().maxCoeff() <= 1e-12);

  const StackedEstimate same = estimate_pair(d, Policy::identity(), Policy::identity(), linear_config(3));
  CHECK(same.theta.head(4) == same.theta.tail(4));
}

TEST_CASE("parallel and serial target loops give identical trajectories") {
  const DgpParams p = study_params(0.5);
  const LongitudinalDataset d = generate(p, 250, 6);
  const SdrConfig c = linear_config(2);
  const CrossFitNuisance nuis(c, sdr_folds(d.n(), c));
  const TrajectoryEstimate a = estimate_trajectory(d, Policy::shift(-1.0), nuis, true);
  const TrajectoryEstimate b = estimate_trajectory(d, Policy::shift(-1.0), nuis, false);
  CHECK(a.eif == b.eif);
  CHECK(a.theta == b.theta);
}

TEST_CASE("oracle nuisances give a shift estimate near the analytic truth") {
  const DgpParams p = study_params(1.0);
  const AnalyticTruth truth = analytic_truth(p);
  const LongitudinalDataset d = generate(p, 20000, 8);
  const TrajectoryEstimate est = estimate_trajectory(d, Policy::shift(-1.0), DgpOracleNuisance(p), false);
  for (int t = 0; t < 4; ++t) {
    const double se = std::sqrt((est.eif.col(t).array() - est.theta(t)).square().sum() / (20000.0 - 1) / 20000.0);
    CHECK(std::abs(est.theta(t) - truth.theta_dprime(t)) <= 4.0 * se);
  }
}

TEST_CASE("invalid configuration is rejected") {
  SdrConfig c = default_sdr_config();
  c.folds = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = default_sdr_config();
  c.ratio_p_min = 0.6;
  CHECK_THROWS_AS(c.validate(), Error);
  LearnerSettings s;
  s.regression_learners = {"forest"};
  CHECK_THROWS_AS(make_sdr_config(s, 5, 1), Error);
}

TEST_CASE("same data, configuration and seed give bit-identical estimates") {
  std::mt19937_64 rng(11);
  const LongitudinalDataset d = testutil::random_dataset(rng, 150, 3, 1);
  const SdrConfig c = default_sdr_config(21);
  const TrajectoryEstimate a = estimate_trajectory(d, Policy::shift(-0.5), c);
  const TrajectoryEstimate b = estimate_trajectory(d, Policy::shift(-0.5), c);
  CHECK(a.theta == b.theta);
  CHECK(a.eif == b.eif);
}
