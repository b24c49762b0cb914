#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lmtp/errors.hpp"

namespace lmtp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Time indices are zero-based throughout the library (t = 0 .. tau-1).
// File column names are one-based (A1, Y1, L1_1, ...).

/// Rectangular panel Z = (L_1, A_1, Y_1, ..., L_tau, A_tau, Y_tau) for n
/// individuals. Immutable once constructed; construction validates that every
/// block has n rows, values are finite, and assessment times increase.
class LongitudinalDataset {
 public:
  LongitudinalDataset(std::vector<MatrixXd> covariates, MatrixXd exposures, MatrixXd outcomes,
                      std::vector<double> assessment_times = {});

  std::size_t n() const { return static_cast<std::size_t>(exposures_.rows()); }
  int tau() const { return static_cast<int>(exposures_.cols()); }

  // Number of covariates p_t at time t.
  int covariate_count(int t) const;
  const MatrixXd& covariates(int t) const;
  const MatrixXd& exposures() const { return exposures_; }
  const MatrixXd& outcomes() const { return outcomes_; }
  Eigen::Ref<const VectorXd> exposure(int t) const { return exposures_.col(t); }
  Eigen::Ref<const VectorXd> outcome(int t) const { return outcomes_.col(t); }
  const std::vector<double>& assessment_times() const { return times_; }

  bool operator==(const LongitudinalDataset& other) const;

 private:
  void check_time(int t) const;

  std::vector<MatrixXd> covariates_;
  MatrixXd exposures_;
  MatrixXd outcomes_;
  std::vector<double> times_;
};

// Column prefixes for the wide CSV layout: {covariate}{t}_{j}, {exposure}{t},
// {outcome}{t}.
struct CsvSchema {
  std::string covariate_prefix = "L";
  std::string exposure_prefix = "A";
  std::string outcome_prefix = "Y";
};

/// Reads a wide CSV. Columns may appear in any order and unrecognized columns
/// are ignored. tau and p_t are inferred from the header. An optional leading
/// comment line `# v: 0,2,4,6` supplies assessment times (default 1..tau).
LongitudinalDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
LongitudinalDataset parse_csv(std::istream& in, const CsvSchema& schema = {});

/// Writes the canonical layout (per time: covariates, exposure, outcome) with
/// shortest round-trip number formatting, so load_csv reproduces the dataset
/// exactly.
void write_csv(const LongitudinalDataset& data, const std::filesystem::path& path,
               const CsvSchema& schema = {});
void write_csv(const LongitudinalDataset& data, std::ostream& out, const CsvSchema& schema = {});

// Number of history columns at time t: t exposures, sum_{s<=t} p_s covariates
// and t outcomes.
int history_width(const LongitudinalDataset& data, int t);

/// H_t = (A_0..A_{t-1}, L_0..L_t, Y_0..Y_{t-1}) flattened row-wise. Exposures
/// come first, then covariate blocks in time order, then outcomes.
MatrixXd history_features(const LongitudinalDataset& data, int t);

// Per-target-time fitting summary.
struct TimeDiagnostics {
  int ratio_clipped = 0;          // ratios at the clip bounds, summed over s <= t
  double ratio_min = 1.0;
  double ratio_max = 1.0;
  // Mean stack weights of the outcome regressions, one entry per s = t..0.
  std::vector<std::vector<double>> regression_weights;
  bool out_of_range = false;      // theta_t outside the observed range of Y_t
};

struct TrajectoryEstimate {
  std::string policy_label;
  VectorXd theta;  // length tau
  MatrixXd eif;    // n x tau, column means equal theta
  std::vector<TimeDiagnostics> diagnostics;
};

struct StackedEstimate {
  std::string label_prime;
  std::string label_dprime;
  VectorXd theta;  // (theta'_1..theta'_tau, theta''_1..theta''_tau)
  MatrixXd eif;    // n x 2 tau, same column order

  int tau() const { return static_cast<int>(theta.size() / 2); }
};

StackedEstimate stack(const TrajectoryEstimate& prime, const TrajectoryEstimate& dprime);

// Column means in a fixed summation order.
VectorXd column_means(const MatrixXd& m);

}  // namespace lmtp
