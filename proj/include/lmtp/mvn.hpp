#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "lmtp/errors.hpp"

namespace lmtp {

// ---------------------------------------------------------------------------
// Univariate special functions

double normal_cdf(double x);
double normal_pdf(double x);
// Inverse of normal_cdf; throws a numerical error outside (0, 1).
double normal_quantile(double p);

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double chisq_cdf(double x, int k);
// Upper tail P(chi2_k > x), computed without cancellation.
double chisq_sf(double x, int k);
double chisq_quantile(double p, int k);

// ---------------------------------------------------------------------------
// Symmetric-rectangle multivariate normal probabilities
//
// g(t; R) = P(-t <= X_j <= t for all j), X ~ N_k(0, R).

struct MvnConfig {
  int min_points = 1 << 10;   // first lattice size tried
  int max_points = 1 << 15;   // lattice size cap
  int shifts = 12;            // random shifts; the standard error comes from their spread
  double target_se = 1e-4;
  std::uint64_t seed = 0x5eed5eedULL;
  std::vector<double> jitter{0.0, 1e-10, 1e-8, 1e-6};
  bool parallel = true;       // evaluate shifts with OpenMP

  void validate() const;
};

struct MvnResult {
  double estimate = 0.0;
  double std_error = 0.0;
  int points = 0;             // lattice points per shift
  bool precision_ok = true;   // std_error <= target_se
};

/// Precomputes the pivoted Cholesky factor and the randomized lattice for one
/// correlation matrix. Every evaluation uses the same shifts and point set
/// prefix, so results for different t share random numbers.
class RectangleProbability {
 public:
  RectangleProbability(const Eigen::MatrixXd& correlation, MvnConfig config = {});

  int dimension() const { return static_cast<int>(chol_.rows()); }
  double jitter_used() const { return jitter_; }
  const MvnConfig& config() const { return config_; }

  // Doubles the lattice size from min_points until the standard error reaches
  // the target or max_points is hit.
  MvnResult evaluate(double t) const;
  // Fixed lattice size.
  MvnResult evaluate(double t, int points) const;
  // Same estimate computed on one thread; kept as the reference for the
  // parallel shift loop.
  MvnResult evaluate_serial(double t, int points) const;

 private:
  double integrate_shift(double t, int points, int shift) const;
  MvnResult combine(const std::vector<double>& per_shift, int points) const;

  Eigen::MatrixXd chol_;  // lower triangular, variables in pivot order
  double jitter_ = 0.0;
  MvnConfig config_;
  std::vector<double> generators_;           // one per lattice dimension
  std::vector<std::vector<double>> offsets_;  // shifts x (k - 1)
};

MvnResult mvn_rect_prob(double t, const Eigen::MatrixXd& correlation, const MvnConfig& config = {});

struct MvnQuantile {
  double t = 0.0;
  MvnResult at_t;
};

/// Solves g(t; R) = p by bisection between the independence-free bounds
/// normal_quantile((1 + p) / 2) and normal_quantile(1 - (1 - p) / (2k)),
/// holding the lattice fixed so g is evaluated with common random numbers.
MvnQuantile mvn_rect_quantile(double p, const RectangleProbability& g, double tol = 1e-5);
MvnQuantile mvn_rect_quantile(double p, const Eigen::MatrixXd& correlation, const MvnConfig& config = {});

// Validates a correlation matrix (square, symmetric, unit diagonal, finite).
void check_correlation(const Eigen::MatrixXd& r);

}  // namespace lmtp
