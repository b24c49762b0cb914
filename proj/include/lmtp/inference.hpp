#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lmtp/data_model.hpp"
#include "lmtp/mvn.hpp"

namespace lmtp {

enum class ContrastKind { baseline, adjacent, custom };

std::string to_string(ContrastKind kind);

/// k x 2tau contrast matrix applied to the stacked (theta', theta'') vector.
struct ContrastMatrix {
  MatrixXd K;
  ContrastKind kind = ContrastKind::custom;

  int rows() const { return static_cast<int>(K.rows()); }
};

// Baseline: row j compares the change from time 1 to time j + 1 between the
// two policies. Adjacent: row j compares the change from time j to j + 1.
ContrastMatrix build_contrast(ContrastKind kind, int tau);
// Validates shape (2tau columns, at least one row) and rejects all-zero rows.
ContrastMatrix custom_contrast(MatrixXd K, int tau);
// Whitespace or comma separated rows, one per line; '#' starts a comment.
ContrastMatrix load_contrast(const std::string& path, int tau);

/// Sample covariance (divisor n - 1) of the EIF columns, divided by n.
MatrixXd empirical_covariance(const MatrixXd& eif);
MatrixXd empirical_covariance(const StackedEstimate& stacked);

struct ContrastResult {
  VectorXd nu_hat;
  MatrixXd S_star;
  VectorXd D_star;  // diagonal of S_star
  MatrixXd R_star;
  VectorXd t_star;
  VectorXd h;

  int k() const { return static_cast<int>(nu_hat.size()); }
};

// Throws an estimation error when a contrast has variance <= 1e-14. An empty
// h means the zero vector.
ContrastResult contrast_estimate(const StackedEstimate& stacked, const ContrastMatrix& contrast,
                                 const VectorXd& h = {});
ContrastResult contrast_estimate(const VectorXd& theta, const MatrixXd& covariance, const MatrixXd& K,
                                 const VectorXd& h = {});

struct WaldResult {
  double statistic = 0.0;
  int df = 0;
  double p = 1.0;
  double jitter = 0.0;  // ridge added to R* before inversion
};

/// T*' R*^+ T* against chi-square with k degrees of freedom. R* is inverted
/// through its eigendecomposition with relative cutoff 1e-12, after the
/// smallest jitter from the schedule that makes it positive definite with
/// condition number at most 1e12.
WaldResult wald_test(const ContrastResult& result, const std::vector<double>& jitter = {0.0, 1e-10, 1e-8, 1e-6});

struct MaxTestResult {
  double statistic = 0.0;
  double p = 1.0;
  double q = 0.0;         // q_{m, alpha}
  double mc_error = 0.0;  // larger of the standard errors of g at the statistic and at q
  bool precision_ok = true;
};

enum class Adjustment { unadjusted, bonferroni, max };

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct LocalTest {
  int j = 0;  // zero-based contrast row
  double estimate = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p_unadjusted = 1.0;
  double p_bonferroni = 1.0;
  double p_max = 1.0;
  Interval ci_pointwise;
  Interval ci_bonferroni;
  Interval ci_max;
};

/// Global and local inference sharing one rectangle-probability evaluator, so
/// the max-adjusted local p-values and the global max test are computed from
/// the same random numbers.
class MaxProcedure {
 public:
  MaxProcedure(const ContrastResult& result, double alpha, const MvnConfig& config = {});

  const MaxTestResult& global() const { return global_; }
  // 1 - g(|t_j|; R*), never below the global p-value or the unadjusted p-value.
  double local_p(int j) const { return local_p_.at(static_cast<std::size_t>(j)); }
  double threshold() const { return global_.q; }

 private:
  MaxTestResult global_;
  std::vector<double> local_p_;
};

MaxTestResult max_test(const ContrastResult& result, double alpha, const MvnConfig& config = {});

// Adjusted p-values for every contrast row under one method.
std::vector<double> local_tests(const ContrastResult& result, Adjustment method, const MvnConfig& config = {});

// Critical value c for the rule: z_{alpha/2}, z_{alpha/(2k)} or q_{m,alpha}.
double critical_value(const ContrastResult& result, double alpha, Adjustment rule, const MvnConfig& config = {});
std::vector<Interval> simultaneous_ci(const ContrastResult& result, double alpha, Adjustment rule,
                                      const MvnConfig& config = {});

struct InferenceReport {
  ContrastKind kind = ContrastKind::baseline;
  double alpha = 0.05;
  ContrastResult contrast;
  WaldResult wald;
  MaxTestResult max;
  std::vector<LocalTest> locals;
  bool degenerate = false;  // both policies gave identical EIF columns
};

/// Full pipeline: contrast, Wald and max tests, all local tests and intervals.
/// When the two trajectories are identical column for column the contrasts
/// are exactly zero; the report then carries zero estimates and p-values of 1
/// instead of failing on the zero variance.
InferenceReport infer(const StackedEstimate& stacked, const ContrastMatrix& contrast, double alpha,
                      const MvnConfig& config = {}, const VectorXd& h = {});

// True when the d' and d'' EIF blocks are identical.
bool identical_trajectories(const StackedEstimate& stacked);

}  // namespace lmtp
