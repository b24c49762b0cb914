#pragma once

#include <Eigen/Dense>

namespace lmtp {

struct NnlsResult {
  Eigen::VectorXd weights;
  int sweeps = 0;
  bool converged = false;
};

/// min ||Z w - y||^2 subject to w >= 0, by projected coordinate descent on the
/// Gram system. Stops when the largest coordinate change falls below `tol`.
NnlsResult nnls(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, double tol = 1e-10,
                int max_sweeps = 10000);

}  // namespace lmtp
