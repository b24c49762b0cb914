#include "lmtp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lmtp {

namespace {

constexpr double kDegenerateVariance = 1e-14;
constexpr double kMaxCondition = 1e12;
constexpr double kPinvCutoff = 1e-12;

double clip01(double p) { return std::clamp(p, 0.0, 1.0); }

double two_sided_p(double t) { return clip01(2.0 * normal_cdf(-std::abs(t))); }

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::config, "alpha must lie in (0, 1)");
}

}  // namespace

std::string to_string(ContrastKind kind) {
  switch (kind) {
    case ContrastKind::baseline: return "baseline";
    case ContrastKind::adjacent: return "adjacent";
    case ContrastKind::custom: return "custom";
  }
  return "custom";
}

ContrastMatrix build_contrast(ContrastKind kind, int tau) {
  if (kind == ContrastKind::custom) throw Error(ErrorKind::validation, "custom contrasts need an explicit matrix");
  if (tau < 2) throw Error(ErrorKind::validation, "baseline and adjacent contrasts need at least two time points");
  ContrastMatrix out;
  out.kind = kind;
  out.K = MatrixXd::Zero(tau - 1, 2 * tau);
  for (int j = 0; j < tau - 1; ++j) {
    const int first = kind == ContrastKind::baseline ? 0 : j;
    out.K(j, first) += 1.0;
    out.K(j, j + 1) -= 1.0;
    out.K(j, tau + first) -= 1.0;
    out.K(j, tau + j + 1) += 1.0;
  }
  return out;
}

ContrastMatrix custom_contrast(MatrixXd K, int tau) {
  if (K.rows() < 1) throw Error(ErrorKind::validation, "contrast matrix needs at least one row");
  if (K.cols() != 2 * tau)
    throw Error(ErrorKind::validation, "contrast matrix has " + std::to_string(K.cols()) + " columns, expected " +
                                           std::to_string(2 * tau));
  if (!K.allFinite()) throw Error(ErrorKind::validation, "contrast matrix has non-finite entries");
  for (Eigen::Index j = 0; j < K.rows(); ++j)
    if ((K.row(j).array() == 0.0).all())
      throw Error(ErrorKind::validation, "contrast row " + std::to_string(j + 1) + " is all zero");
  return {std::move(K), ContrastKind::custom};
}

ContrastMatrix load_contrast(const std::string& path, int tau) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot open contrast file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    std::vector<double> row;
    std::string token;
    while (fields >> token) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw Error(ErrorKind::validation, "contrast file entry '" + token + "' is not a number");
      }
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorKind::validation, "contrast file rows have different lengths");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::validation, "contrast file has no rows");
  MatrixXd K(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      K(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return custom_contrast(std::move(K), tau);
}

MatrixXd empirical_covariance(const MatrixXd& eif) {
  const Eigen::Index n = eif.rows();
  if (n < 2) throw Error(ErrorKind::validation, "covariance needs at least two rows");
  const VectorXd mean = column_means(eif);
  const MatrixXd centered = eif.rowwise() - mean.transpose();
  MatrixXd s = (centered.transpose() * centered) / static_cast<double>(n - 1);
  s = 0.5 * (s + s.transpose());
  return s / static_cast<double>(n);
}

MatrixXd empirical_covariance(const StackedEstimate& stacked) { return empirical_covariance(stacked.eif); }

ContrastResult contrast_estimate(const VectorXd& theta, const MatrixXd& covariance, const MatrixXd& K,
                                 const VectorXd& h) {
  if (K.cols() != theta.size() || covariance.rows() != theta.size() || covariance.cols() != theta.size())
    throw Error(ErrorKind::validation, "contrast, estimate and covariance shapes do not match");
  const Eigen::Index k = K.rows();
  if (h.size() != 0 && h.size() != k) throw Error(ErrorKind::validation, "hypothesis vector has the wrong length");

  ContrastResult out;
  out.h = h.size() == 0 ? VectorXd::Zero(k) : h;
  out.nu_hat = K * theta;
  out.S_star = K * covariance * K.transpose();
  out.S_star = 0.5 * (out.S_star + out.S_star.transpose());
  out.D_star = out.S_star.diagonal();
  for (Eigen::Index j = 0; j < k; ++j)
    if (!(out.D_star(j) > kDegenerateVariance))
      throw Error(ErrorKind::estimation, "contrast row " + std::to_string(j + 1) +
                                             " has zero estimated variance (degenerate contrast)");
  const VectorXd inv_sd = out.D_star.cwiseSqrt().cwiseInverse();
  out.R_star = inv_sd.asDiagonal() * out.S_star * inv_sd.asDiagonal();
  for (Eigen::Index j = 0; j < k; ++j) {
    out.R_star(j, j) = 1.0;
    for (Eigen::Index i = 0; i < j; ++i) {
      const double r = std::clamp(out.R_star(i, j), -1.0, 1.0);
      out.R_star(i, j) = r;
      out.R_star(j, i) = r;
    }
  }
  out.t_star = (out.nu_hat - out.h).cwiseProduct(inv_sd);
  return out;
}

ContrastResult contrast_estimate(const StackedEstimate& stacked, const ContrastMatrix& contrast, const VectorXd& h) {
  return contrast_estimate(stacked.theta, empirical_covariance(stacked), contrast.K, h);
}

WaldResult wald_test(const ContrastResult& result, const std::vector<double>& jitter) {
  const Eigen::Index k = result.R_star.rows();
  for (double eps : jitter) {
    const MatrixXd r = result.R_star + eps * MatrixXd::Identity(k, k);
    if (Eigen::LLT<MatrixXd>(r).info() != Eigen::Success) continue;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(r);
    const VectorXd& lambda = eig.eigenvalues();
    const double lmax = lambda.maxCoeff();
    const double lmin = lambda.minCoeff();
    if (!(lmin > 0.0) || lmax / lmin > kMaxCondition) continue;

    VectorXd inv = VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < k; ++i)
      if (lambda(i) > kPinvCutoff * lmax) inv(i) = 1.0 / lambda(i);
    const VectorXd proj = eig.eigenvectors().transpose() * result.t_star;
    WaldResult out;
    out.statistic = proj.cwiseAbs2().dot(inv);
    out.df = static_cast<int>(k);
    out.p = clip01(chisq_sf(out.statistic, out.df));
    out.jitter = eps;
    return out;
  }
  throw Error(ErrorKind::numerical,
              "contrast correlation matrix is too close to singular for the Wald test "
              "(condition number above 1e12); use a smaller set of contrasts");
}

MaxProcedure::MaxProcedure(const ContrastResult& result, double alpha, const MvnConfig& config) {
  check_alpha(alpha);
  const int k = result.k();
  const RectangleProbability g(result.R_star, config);

  const VectorXd abs_t = result.t_star.cwiseAbs();
  Eigen::Index arg = 0;
  global_.statistic = abs_t.maxCoeff(&arg);
  const MvnResult at_stat = g.evaluate(global_.statistic);
  global_.p = clip01(std::max(1.0 - at_stat.estimate, two_sided_p(global_.statistic)));

  const MvnQuantile q = mvn_rect_quantile(1.0 - alpha, g);
  global_.q = q.t;
  global_.mc_error = std::max(at_stat.std_error, q.at_t.std_error);
  global_.precision_ok = at_stat.precision_ok && q.at_t.precision_ok;

  // Local values reuse the lattice size chosen at the statistic. Flooring at
  // the global p-value makes the global p-value the minimum of the local ones,
  // so global and local decisions agree for every alpha.
  local_p_.resize(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const double pu = two_sided_p(abs_t(j));
    double p = j == arg ? global_.p : 1.0 - g.evaluate(abs_t(j), at_stat.points).estimate;
    local_p_[static_cast<std::size_t>(j)] = clip01(std::max({p, pu, global_.p}));
  }
}

MaxTestResult max_test(const ContrastResult& result, double alpha, const MvnConfig& config) {
  return MaxProcedure(result, alpha, config).global();
}

std::vector<double> local_tests(const ContrastResult& result, Adjustment method, const MvnConfig& config) {
  const int k = result.k();
  std::vector<double> p(static_cast<std::size_t>(k));
  if (method == Adjustment::max) {
    const MaxProcedure proc(result, 0.05, config);
    for (int j = 0; j < k; ++j) p[static_cast<std::size_t>(j)] = proc.local_p(j);
    return p;
  }
  for (int j = 0; j < k; ++j) {
    const double pu = two_sided_p(result.t_star(j));
    p[static_cast<std::size_t>(j)] = method == Adjustment::bonferroni ? std::min(1.0, k * pu) : pu;
  }
  return p;
}

double critical_value(const ContrastResult& result, double alpha, Adjustment rule, const MvnConfig& config) {
  check_alpha(alpha);
  switch (rule) {
    case Adjustment::unadjusted: return normal_quantile(1.0 - alpha / 2.0);
    case Adjustment::bonferroni: return normal_quantile(1.0 - alpha / (2.0 * result.k()));
    case Adjustment::max: return mvn_rect_quantile(1.0 - alpha, RectangleProbability(result.R_star, config)).t;
  }
  return normal_quantile(1.0 - alpha / 2.0);
}

namespace {

std::vector<Interval> intervals(const ContrastResult& result, double c) {
  std::vector<Interval> out;
  for (int j = 0; j < result.k(); ++j) {
    const double half = c * std::sqrt(result.S_star(j, j));
    out.push_back({result.nu_hat(j) - half, result.nu_hat(j) + half});
  }
  return out;
}

}  // namespace

std::vector<Interval> simultaneous_ci(const ContrastResult& result, double alpha, Adjustment rule,
                                      const MvnConfig& config) {
  return intervals(result, critical_value(result, alpha, rule, config));
}

bool identical_trajectories(const StackedEstimate& stacked) {
  const int tau = stacked.tau();
  return stacked.eif.leftCols(tau) == stacked.eif.rightCols(tau) &&
         stacked.theta.head(tau) == stacked.theta.tail(tau);
}

InferenceReport infer(const StackedEstimate& stacked, const ContrastMatrix& contrast, double alpha,
                      const MvnConfig& config, const VectorXd& h) {
  check_alpha(alpha);
  InferenceReport out;
  out.kind = contrast.kind;
  out.alpha = alpha;
  const int k = contrast.rows();
  const bool null_h = h.size() == 0 || (h.array() == 0.0).all();

  if (null_h && identical_trajectories(stacked)) {
    // With identical blocks a row is exactly zero when its d' and d''
    // coefficients cancel, which holds for baseline and adjacent contrasts.
    // Other custom rows go through the normal path.
    const int tau = stacked.tau();
    const MatrixXd combined = contrast.K.leftCols(tau) + contrast.K.rightCols(tau);
    if ((combined.array() == 0.0).all()) {
      out.degenerate = true;
      out.contrast.nu_hat = VectorXd::Zero(k);
      out.contrast.S_star = MatrixXd::Zero(k, k);
      out.contrast.D_star = VectorXd::Zero(k);
      out.contrast.R_star = MatrixXd::Identity(k, k);
      out.contrast.t_star = VectorXd::Zero(k);
      out.contrast.h = VectorXd::Zero(k);
      out.wald = {0.0, k, 1.0, 0.0};
      out.max = {0.0, 1.0, critical_value(out.contrast, alpha, Adjustment::max, config), 0.0, true};
      for (int j = 0; j < k; ++j) out.locals.push_back(LocalTest{j, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, {}, {}, {}});
      return out;
    }
  }

  out.contrast = contrast_estimate(stacked, contrast, h);
  out.wald = wald_test(out.contrast, config.jitter);
  const MaxProcedure proc(out.contrast, alpha, config);
  out.max = proc.global();

  const auto pointwise = intervals(out.contrast, normal_quantile(1.0 - alpha / 2.0));
  const auto bonf = intervals(out.contrast, normal_quantile(1.0 - alpha / (2.0 * k)));
  const auto maxci = intervals(out.contrast, proc.threshold());
  for (int j = 0; j < k; ++j) {
    LocalTest local;
    local.j = j;
    local.estimate = out.contrast.nu_hat(j);
    local.se = std::sqrt(out.contrast.S_star(j, j));
    local.t = out.contrast.t_star(j);
    local.p_unadjusted = two_sided_p(local.t);
    local.p_bonferroni = std::min(1.0, k * local.p_unadjusted);
    local.p_max = proc.local_p(j);
    local.ci_pointwise = pointwise[static_cast<std::size_t>(j)];
    local.ci_bonferroni = bonf[static_cast<std::size_t>(j)];
    local.ci_max = maxci[static_cast<std::size_t>(j)];
    out.locals.push_back(local);
  }
  return out;
}

}  // namespace lmtp
