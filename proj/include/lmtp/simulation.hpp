#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmtp/data_model.hpp"
#include "lmtp/inference.hpp"
#include "lmtp/sdr.hpp"

namespace lmtp {

/// Linear-Gaussian longitudinal system with one covariate, one exposure and
/// one outcome per time and unit noise variances:
///   L_1 ~ N(1, 1),  A_1 ~ N(8.5 - L_1, 1),  Y_1 ~ N(70.5 + g_1 (-L_1 + alpha A_1), 1)
///   L_t ~ N(5 + .47 L_{t-1} - .24 A_{t-1} - .05 Y_{t-1} - .3 v_t, 1)
///   A_t ~ N(10 - .2 L_t + .1 A_{t-1} - .05 Y_{t-1} + .5 v_t, 1)
///   Y_t ~ N(78 + g_t (-.5 L_t + alpha A_t - .15 Y_{t-1}) - .3 v_t - .2 v_t^2 - .1 v_t^3
///           - beta (.1 v_t + .04 v_t^2 + .02 v_t^3) A_t, 1)
struct DgpParams {
  double alpha = -2.0;
  double beta = 0.0;
  std::vector<double> gamma;  // one per time; empty until calibrated
  std::vector<double> v{0.0, 2.0, 4.0, 6.0};
  double shift = -1.0;        // change applied to exposures by the study policy
  std::uint64_t seed = 1;

  int tau() const { return static_cast<int>(v.size()); }
  void validate() const;
};

// Default parameters with gamma calibrated.
DgpParams study_params(double beta);

struct MeanPath {
  VectorXd L;
  VectorXd A;
  VectorXd Y;
};

/// Expectations of (L_t, A_t, Y_t) under the natural system (change = 0) or
/// with every exposure moved by `change` (the intervened exposure feeds into
/// later covariates, exposures and outcomes).
MeanPath analytic_means(const DgpParams& params, double change);

struct AnalyticTruth {
  VectorXd theta_prime;   // identity policy
  VectorXd theta_dprime;  // shift policy
  VectorXd delta;         // baseline contrast: theta''_{j+1} - theta''_1 - (theta'_{j+1} - theta'_1)
  std::vector<double> gamma;
};

AnalyticTruth analytic_truth(const DgpParams& params);

/// Sequential calibration at beta = 0: for each t, with gamma_t provisionally
/// 1, set gamma_t = -alpha / (theta''_t - theta'_t) and move on with the
/// updated means. The starting gamma values in `params` are ignored.
std::vector<double> calibrate_gamma(const DgpParams& params);

/// Draws n individuals. With `intervened` every exposure is the natural draw
/// plus params.shift, given the intervened past.
LongitudinalDataset generate(const DgpParams& params, std::size_t n, std::uint64_t seed, bool intervened = false);

/// True nuisances of the system for the identity policy or the unbounded shift
/// by params.shift. The outcome regression ignores the pseudo-outcome and
/// returns the conditional mean of Y_t given (L_s, A_s = a, Y_{s-1}) when later
/// exposures follow the policy; the ratio is the closed-form Gaussian ratio.
class DgpOracleNuisance final : public NuisanceEstimator {
 public:
  explicit DgpOracleNuisance(DgpParams params);

  RatioEstimate ratio(const LongitudinalDataset& data, const Policy& policy, int s) const override;
  RegressionPredictions regress(const LongitudinalDataset& data, const Policy& policy, int s, int t,
                                const VectorXd& pseudo) const override;

  // Conditional mean of the exposure at time s given the observed history.
  VectorXd exposure_mean(const LongitudinalDataset& data, int s) const;

 private:
  double change_for(const Policy& policy) const;
  DgpParams params_;
};

// ---------------------------------------------------------------------------
// Replication study

struct StudyGrid {
  std::vector<std::size_t> n{250, 1000, 2500};
  std::vector<double> beta{0.0, 0.5, 1.0};
  int replicates = 300;
};

// Parses "n=250,1000 beta=0,1 reps=10" (keys in any order, each optional).
StudyGrid parse_grid(const std::string& text, StudyGrid base = {});

struct StudyConfig {
  StudyGrid grid;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  LearnerSettings learners;
  int folds = 5;
  double ratio_p_min = 1e-2;
  MvnConfig mvn;
  bool parallel = true;  // replicates in parallel
  DgpParams dgp;         // beta is overridden per grid cell; gamma calibrated if empty
};

struct ReplicateRecord {
  std::size_t n = 0;
  double beta = 0.0;
  int replicate = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  VectorXd delta_hat;
  VectorXd se;
  double wald_p = 1.0;
  double max_p = 1.0;
  double q_max = 0.0;
  std::vector<double> p_unadjusted;
  std::vector<double> p_bonferroni;
  std::vector<double> p_max;
  std::vector<bool> cover_pointwise;
  std::vector<bool> cover_bonferroni;
  std::vector<bool> cover_max;
};

struct RuleRates {
  double none = 0.0;
  double bonferroni = 0.0;
  double max = 0.0;
};

struct CellSummary {
  std::size_t n = 0;
  double beta = 0.0;
  int replicates = 0;
  int failures = 0;
  VectorXd truth;
  VectorXd mean_estimate;
  VectorXd bias;
  VectorXd empirical_sd;
  VectorXd mean_se;
  double wald_reject = 0.0;
  double max_reject = 0.0;
  RuleRates simultaneous_power;     // every local null rejected
  RuleRates simultaneous_coverage;  // every interval covers the truth
};

struct StudyTables {
  StudyConfig config;
  std::vector<double> gamma;
  std::vector<CellSummary> cells;
  std::vector<ReplicateRecord> records;  // (n, beta, replicate) order
};

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t n, double beta, int replicate);

// One replicate: generate, estimate (identity, shift), baseline inference.
ReplicateRecord run_replicate(const StudyConfig& config, const DgpParams& params, const VectorXd& truth,
                              std::size_t n, int replicate);

StudyTables run_study(const StudyConfig& config);
// Single-threaded reference for the replicate loop.
StudyTables run_study_serial(const StudyConfig& config);

CellSummary summarize(std::size_t n, double beta, const VectorXd& truth, const std::vector<ReplicateRecord>& records,
                      double alpha);

}  // namespace lmtp
