#include "lmtp/nnls.hpp"

#include <algorithm>
#include <cmath>

namespace lmtp {

NnlsResult nnls(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, double tol, int max_sweeps) {
  const Eigen::MatrixXd gram = z.transpose() * z;
  const Eigen::VectorXd zty = z.transpose() * y;
  const auto m = gram.rows();

  NnlsResult out;
  out.weights = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd grad = -zty;  // gram * w - zty at w = 0
  const double scale = std::max(1.0, gram.diagonal().maxCoeff());

  for (out.sweeps = 1; out.sweeps <= max_sweeps; ++out.sweeps) {
    double max_step = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (gram(j, j) <= 0.0) continue;
      const double old = out.weights(j);
      const double next = std::max(0.0, old - grad(j) / gram(j, j));
      const double step = next - old;
      if (step != 0.0) {
        out.weights(j) = next;
        grad += step * gram.col(j);
        max_step = std::max(max_step, std::abs(step) * std::sqrt(gram(j, j) / scale));
      }
    }
    if (max_step <= tol) {
      out.converged = true;
      break;
    }
  }
  out.sweeps = std::min(out.sweeps, max_sweeps);
  return out;
}

}  // namespace lmtp
