#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmtp/data_model.hpp"
#include "lmtp/learners.hpp"
#include "lmtp/policy.hpp"

namespace lmtp {

struct SdrConfig {
  LearnerPtr regression;   // outcome regressions m_s
  LearnerPtr classifier;   // natural-vs-intervened classifier for r_s
  int folds = 5;           // individual-level cross-fitting folds (1 = none)
  std::uint64_t seed = 1;
  double ratio_p_min = 1e-2;  // probabilities clipped to [p_min, 1 - p_min] before taking odds
  bool parallel = true;       // target times in parallel

  void validate() const;
};

struct LearnerSettings {
  int boost_rounds = 200;
  double boost_learning_rate = 0.1;
  int boost_depth = 1;
  int stack_folds = 5;
  double classifier_p_min = 1e-3;
  std::vector<std::string> regression_learners{"ols_quadratic", "boost"};
  std::vector<std::string> classification_learners{"logistic", "boost"};
};

// Stack of {OLS with quadratic expansion, boosted trees} for regressions and
// {logistic, boosted trees} for the ratio classifier.
SdrConfig default_sdr_config(std::uint64_t seed = 1);
SdrConfig make_sdr_config(const LearnerSettings& settings, int folds, std::uint64_t seed, double ratio_p_min = 1e-2);

struct RatioEstimate {
  VectorXd ratio;         // r_s at the observed (A_s, H_s)
  int clipped = 0;
  std::vector<double> weights;  // mean stack weights of the classifier, if stacked
};

struct RegressionPredictions {
  VectorXd natural;       // m_s(A_s, H_s)
  VectorXd intervened;    // m_s(A_s^d, H_s)
  std::vector<double> weights;
};

/// Source of nuisance estimates for the sequential regression. The default
/// implementation fits cross-fitted learners; tests inject true nuisances.
class NuisanceEstimator {
 public:
  virtual ~NuisanceEstimator() = default;
  virtual RatioEstimate ratio(const LongitudinalDataset& data, const Policy& policy, int s) const = 0;
  // Regress `pseudo` (phi_{s+1,t}) on (A_s, H_s).
  virtual RegressionPredictions regress(const LongitudinalDataset& data, const Policy& policy, int s, int t,
                                        const VectorXd& pseudo) const = 0;
};

class CrossFitNuisance final : public NuisanceEstimator {
 public:
  CrossFitNuisance(SdrConfig config, FoldAssignment folds);

  RatioEstimate ratio(const LongitudinalDataset& data, const Policy& policy, int s) const override;
  RegressionPredictions regress(const LongitudinalDataset& data, const Policy& policy, int s, int t,
                                const VectorXd& pseudo) const override;

 private:
  SdrConfig config_;
  FoldAssignment folds_;
};

// Design (A_s, H_s) with the exposure column first.
MatrixXd exposure_design(const VectorXd& exposure, const MatrixXd& history);

/// Density ratio r_s = g_s^d / g_s by the classification trick: natural rows
/// (label 0) and intervened rows (label 1) share the history, the classifier
/// is cross-fitted at the individual level, and the odds p / (1 - p) at the
/// natural rows are returned after clipping p to [p_min, 1 - p_min].
RatioEstimate estimate_ratio(const LongitudinalDataset& data, const Policy& policy, int s, const Learner& classifier,
                             const FoldAssignment& folds, double p_min);

struct EifColumn {
  int t = 0;
  std::string policy_label;
  VectorXd values;  // phi_{1,t}(Z_i) for each individual
  double theta = 0.0;
  TimeDiagnostics diagnostics;
};

/// phi_{1,t} = sum_{p=0}^{t} (prod_{k<=p} r_k) (m_{p+1}(a^d) - m_p(a)) + m_0(a^d),
/// where the p = t term uses Y_t for m_{t+1}. `natural`/`intervened` hold the
/// m_s predictions as columns s = 0..t; `ratios` holds r_s as columns.
VectorXd assemble_eif(const VectorXd& outcome, const MatrixXd& natural, const MatrixXd& intervened,
                      const MatrixXd& ratios);

/// Backward recursion for target time t: starting from Y_t, regress the
/// current pseudo-outcome on (A_s, H_s) for s = t..0 and update it to
/// r_s (pseudo - m_s(A_s)) + m_s(A_s^d). `ratios` is n x (>= t + 1).
EifColumn sequential_regression(const LongitudinalDataset& data, const Policy& policy, int t,
                                const MatrixXd& ratios, const NuisanceEstimator& nuisance,
                                const std::vector<RatioEstimate>& ratio_fits = {});

/// theta_t for t = 0..tau-1. The identity policy returns the outcome columns
/// directly.
TrajectoryEstimate estimate_trajectory(const LongitudinalDataset& data, const Policy& policy, const SdrConfig& config);
TrajectoryEstimate estimate_trajectory(const LongitudinalDataset& data, const Policy& policy,
                                       const NuisanceEstimator& nuisance, bool parallel = true);
// Always runs the sequential regression, even for the identity policy.
TrajectoryEstimate estimate_trajectory_general(const LongitudinalDataset& data, const Policy& policy,
                                               const NuisanceEstimator& nuisance, bool parallel = true);

/// Stacked (d', d'') estimate sharing one fold assignment.
StackedEstimate estimate_pair(const LongitudinalDataset& data, const Policy& prime, const Policy& dprime,
                              const SdrConfig& config);
StackedEstimate estimate_pair(const LongitudinalDataset& data, const Policy& prime, const Policy& dprime,
                              const NuisanceEstimator& nuisance, bool parallel = true);

FoldAssignment sdr_folds(std::size_t n, const SdrConfig& config);

}  // namespace lmtp
