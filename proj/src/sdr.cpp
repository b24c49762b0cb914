#include "lmtp/sdr.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>

#include "lmtp/random.hpp"

namespace lmtp {

namespace {

constexpr std::uint64_t kFoldKey = 0xf01d5ULL;

// Mean stack weights across the fold models, empty for non-stacked learners.
std::vector<double> mean_stack_weights(const CrossFit& fit) {
  std::vector<double> mean;
  const int v_count = fit.folds().folds();
  for (int v = 0; v < v_count; ++v) {
    const auto* stack_model = dynamic_cast<const StackModel*>(&fit.model(v));
    if (stack_model == nullptr) return {};
    const VectorXd& w = stack_model->weights();
    if (mean.empty()) mean.assign(static_cast<std::size_t>(w.size()), 0.0);
    for (Eigen::Index j = 0; j < w.size(); ++j) mean[static_cast<std::size_t>(j)] += w(j) / v_count;
  }
  return mean;
}

LearnerPtr build_learner(const std::string& name, const LearnerSettings& s, Task task, std::uint64_t seed) {
  BoostConfig boost;
  boost.rounds = s.boost_rounds;
  boost.learning_rate = s.boost_learning_rate;
  boost.max_depth = s.boost_depth;
  boost.task = task;
  boost.p_min = s.classifier_p_min;
  if (name == "boost") return make_boosted(boost);
  if (task == Task::regression) {
    if (name == "ols") return make_ols(Expansion::none);
    if (name == "ols_quadratic") return make_ols(Expansion::quadratic);
  } else {
    if (name == "logistic") return make_logistic(Expansion::none, s.classifier_p_min);
    if (name == "logistic_quadratic") return make_logistic(Expansion::quadratic, s.classifier_p_min);
  }
  (void)seed;
  throw Error(ErrorKind::config, "unknown " + std::string(task == Task::regression ? "regression" : "classification") +
                                     " learner '" + name + "'");
}

LearnerPtr build_library(const std::vector<std::string>& names, const LearnerSettings& s, Task task,
                         std::uint64_t seed) {
  if (names.empty()) throw Error(ErrorKind::config, "learner library must not be empty");
  std::vector<LearnerPtr> members;
  for (const auto& name : names) members.push_back(build_learner(name, s, task, seed));
  if (members.size() == 1) return members.front();
  return make_stack(std::move(members), s.stack_folds, seed, task, s.classifier_p_min);
}

// Runs body(i) for i in [0, count), optionally in parallel, and rethrows the
// first exception raised by any iteration.
template <typename Body>
void for_each_index(int count, bool parallel, Body&& body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int i = 0; i < count; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void check_finite(const VectorXd& v, const std::string& what) {
  if (!v.allFinite()) throw Error(ErrorKind::estimation, what + " produced non-finite values");
}

}  // namespace

void SdrConfig::validate() const {
  if (!regression || regression->task() != Task::regression)
    throw Error(ErrorKind::config, "a regression learner is required");
  if (!classifier || classifier->task() != Task::classification)
    throw Error(ErrorKind::config, "a classification learner is required");
  if (folds < 1) throw Error(ErrorKind::config, "folds must be at least 1");
  if (!(ratio_p_min > 0.0 && ratio_p_min < 0.5)) throw Error(ErrorKind::config, "ratio p_min must lie in (0, 0.5)");
}

SdrConfig make_sdr_config(const LearnerSettings& settings, int folds, std::uint64_t seed, double ratio_p_min) {
  SdrConfig config;
  config.regression = build_library(settings.regression_learners, settings, Task::regression,
                                    derive_seed(seed, {0x5ec1ULL}));
  config.classifier = build_library(settings.classification_learners, settings, Task::classification,
                                    derive_seed(seed, {0x5ec2ULL}));
  config.folds = folds;
  config.seed = seed;
  config.ratio_p_min = ratio_p_min;
  return config;
}

SdrConfig default_sdr_config(std::uint64_t seed) { return make_sdr_config(LearnerSettings{}, 5, seed); }

FoldAssignment sdr_folds(std::size_t n, const SdrConfig& config) {
  return FoldAssignment::make(n, config.folds, derive_seed(config.seed, {kFoldKey}));
}

MatrixXd exposure_design(const VectorXd& exposure, const MatrixXd& history) {
  MatrixXd x(history.rows(), history.cols() + 1);
  x.col(0) = exposure;
  x.rightCols(history.cols()) = history;
  return x;
}

RatioEstimate estimate_ratio(const LongitudinalDataset& data, const Policy& policy, int s, const Learner& classifier,
                             const FoldAssignment& folds, double p_min) {
  const auto n = static_cast<Eigen::Index>(data.n());
  const MatrixXd history = history_features(data, s);
  const VectorXd natural_a = data.exposure(s);
  const VectorXd intervened_a = policy.intervene(data, s, history);

  const MatrixXd natural = exposure_design(natural_a, history);
  MatrixXd design(2 * n, natural.cols());
  design.topRows(n) = natural;
  design.bottomRows(n) = exposure_design(intervened_a, history);
  VectorXd labels(2 * n);
  labels.head(n).setZero();
  labels.tail(n).setOnes();
  std::vector<int> individual(static_cast<std::size_t>(2 * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    individual[static_cast<std::size_t>(i)] = static_cast<int>(i);
    individual[static_cast<std::size_t>(n + i)] = static_cast<int>(i);
  }

  const CrossFit fit = crossfit(design, labels, individual, classifier, folds);
  const VectorXd p = fit.predict(natural);
  check_finite(p, "ratio classifier at time " + std::to_string(s + 1));

  RatioEstimate out;
  out.ratio.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double pi = p(i);
    if (pi <= p_min) {
      pi = p_min;
      ++out.clipped;
    } else if (pi >= 1.0 - p_min) {
      pi = 1.0 - p_min;
      ++out.clipped;
    }
    out.ratio(i) = pi / (1.0 - pi);
  }
  out.weights = mean_stack_weights(fit);
  return out;
}

CrossFitNuisance::CrossFitNuisance(SdrConfig config, FoldAssignment folds)
    : config_(std::move(config)), folds_(std::move(folds)) {
  config_.validate();
}

RatioEstimate CrossFitNuisance::ratio(const LongitudinalDataset& data, const Policy& policy, int s) const {
  if (policy.is_identity()) {
    RatioEstimate out;
    out.ratio = VectorXd::Ones(static_cast<Eigen::Index>(data.n()));
    return out;
  }
  return estimate_ratio(data, policy, s, *config_.classifier, folds_, config_.ratio_p_min);
}

RegressionPredictions CrossFitNuisance::regress(const LongitudinalDataset& data, const Policy& policy, int s, int,
                                                const VectorXd& pseudo) const {
  const MatrixXd history = history_features(data, s);
  const MatrixXd natural = exposure_design(data.exposure(s), history);
  const MatrixXd intervened = exposure_design(policy.intervene(data, s, history), history);
  const CrossFit fit = crossfit(natural, pseudo, *config_.regression, folds_);
  RegressionPredictions out;
  out.natural = fit.predict(natural);
  out.intervened = fit.predict(intervened);
  out.weights = mean_stack_weights(fit);
  return out;
}

VectorXd assemble_eif(const VectorXd& outcome, const MatrixXd& natural, const MatrixXd& intervened,
                      const MatrixXd& ratios) {
  const Eigen::Index t = natural.cols() - 1;
  VectorXd phi = intervened.col(0);
  VectorXd weight = VectorXd::Ones(outcome.size());
  for (Eigen::Index p = 0; p <= t; ++p) {
    weight = weight.cwiseProduct(ratios.col(p));
    const VectorXd next = p == t ? outcome : VectorXd(intervened.col(p + 1));
    phi += weight.cwiseProduct(next - natural.col(p));
  }
  return phi;
}

EifColumn sequential_regression(const LongitudinalDataset& data, const Policy& policy, int t, const MatrixXd& ratios,
                                const NuisanceEstimator& nuisance, const std::vector<RatioEstimate>& ratio_fits) {
  if (t < 0 || t >= data.tau()) throw Error(ErrorKind::validation, "target time out of range");
  const auto n = static_cast<Eigen::Index>(data.n());
  if (ratios.rows() != n || ratios.cols() < t + 1)
    throw Error(ErrorKind::validation, "ratio matrix does not cover the target time");

  MatrixXd natural(n, t + 1);
  MatrixXd intervened(n, t + 1);
  EifColumn out;
  out.t = t;
  out.policy_label = policy.label();

  VectorXd pseudo = data.outcome(t);
  for (int s = t; s >= 0; --s) {
    RegressionPredictions m = nuisance.regress(data, policy, s, t, pseudo);
    const std::string where = "outcome regression at time " + std::to_string(s + 1);
    check_finite(m.natural, where);
    check_finite(m.intervened, where);
    natural.col(s) = m.natural;
    intervened.col(s) = m.intervened;
    pseudo = ratios.col(s).cwiseProduct(pseudo - m.natural) + m.intervened;
    check_finite(pseudo, "pseudo-outcome at time " + std::to_string(s + 1));
    out.diagnostics.regression_weights.push_back(std::move(m.weights));
  }

  out.values = assemble_eif(data.outcome(t), natural, intervened, ratios.leftCols(t + 1));
  out.theta = out.values.mean();

  auto& d = out.diagnostics;
  d.ratio_min = ratios.leftCols(t + 1).minCoeff();
  d.ratio_max = ratios.leftCols(t + 1).maxCoeff();
  for (int s = 0; s <= t && s < static_cast<int>(ratio_fits.size()); ++s) d.ratio_clipped += ratio_fits[s].clipped;
  d.out_of_range = out.theta < data.outcome(t).minCoeff() || out.theta > data.outcome(t).maxCoeff();
  return out;
}

TrajectoryEstimate estimate_trajectory_general(const LongitudinalDataset& data, const Policy& policy,
                                               const NuisanceEstimator& nuisance, bool parallel) {
  const int tau = data.tau();
  const auto n = static_cast<Eigen::Index>(data.n());

  // Ratios depend only on (policy, s), so they are fitted once and shared by
  // every target time.
  std::vector<RatioEstimate> ratio_fits(static_cast<std::size_t>(tau));
  for_each_index(tau, parallel, [&](int s) { ratio_fits[s] = nuisance.ratio(data, policy, s); });
  MatrixXd ratios(n, tau);
  for (int s = 0; s < tau; ++s) {
    if (ratio_fits[s].ratio.size() != n) throw Error(ErrorKind::estimation, "ratio estimate has the wrong length");
    check_finite(ratio_fits[s].ratio, "density ratio at time " + std::to_string(s + 1));
    ratios.col(s) = ratio_fits[s].ratio;
  }

  std::vector<EifColumn> columns(static_cast<std::size_t>(tau));
  for_each_index(tau, parallel, [&](int t) {
    columns[t] = sequential_regression(data, policy, t, ratios, nuisance, ratio_fits);
  });

  TrajectoryEstimate out;
  out.policy_label = policy.label();
  out.eif.resize(n, tau);
  for (int t = 0; t < tau; ++t) {
    out.eif.col(t) = columns[t].values;
    out.diagnostics.push_back(std::move(columns[t].diagnostics));
  }
  out.theta = column_means(out.eif);
  return out;
}

TrajectoryEstimate estimate_trajectory(const LongitudinalDataset& data, const Policy& policy,
                                       const NuisanceEstimator& nuisance, bool parallel) {
  if (!policy.is_identity()) return estimate_trajectory_general(data, policy, nuisance, parallel);
  TrajectoryEstimate out;
  out.policy_label = policy.label();
  out.eif = data.outcomes();
  out.theta = column_means(out.eif);
  out.diagnostics.resize(static_cast<std::size_t>(data.tau()));
  return out;
}

TrajectoryEstimate estimate_trajectory(const LongitudinalDataset& data, const Policy& policy,
                                       const SdrConfig& config) {
  config.validate();
  const CrossFitNuisance nuisance(config, sdr_folds(data.n(), config));
  return estimate_trajectory(data, policy, nuisance, config.parallel);
}

StackedEstimate estimate_pair(const LongitudinalDataset& data, const Policy& prime, const Policy& dprime,
                              const NuisanceEstimator& nuisance, bool parallel) {
  return stack(estimate_trajectory(data, prime, nuisance, parallel),
               estimate_trajectory(data, dprime, nuisance, parallel));
}

StackedEstimate estimate_pair(const LongitudinalDataset& data, const Policy& prime, const Policy& dprime,
                              const SdrConfig& config) {
  config.validate();
  const CrossFitNuisance nuisance(config, sdr_folds(data.n(), config));
  return estimate_pair(data, prime, dprime, nuisance, config.parallel);
}

}  // namespace lmtp
