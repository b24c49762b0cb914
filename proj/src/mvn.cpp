#include "lmtp/mvn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "lmtp/random.hpp"

namespace lmtp {

// ---------------------------------------------------------------------------
// Normal distribution

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::numerical, "normal_quantile: p must lie in (0, 1)");
  // Rational approximation (Acklam) followed by Halley refinement against erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int iter = 0; iter < 2; ++iter) {
    // Work in the smaller tail to keep the residual accurate.
    const double e = x <= 0 ? normal_cdf(x) - p : (1.0 - p) - normal_cdf(-x);
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Incomplete gamma and chi-square

namespace {

double gamma_p_series(double a, double x) {
  double sum = 1.0 / a, term = sum, ap = a;
  for (int n = 0; n < 10000; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_fraction(double a, double x) {
  // Modified Lentz evaluation of the continued fraction for Q(a, x).
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) throw Error(ErrorKind::numerical, "gamma_p: domain error");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_fraction(a, x);
}

double gamma_q(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) throw Error(ErrorKind::numerical, "gamma_q: domain error");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_fraction(a, x);
}

double chisq_cdf(double x, int k) {
  if (k < 1) throw Error(ErrorKind::numerical, "chisq_cdf: degrees of freedom must be >= 1");
  if (!(x >= 0.0)) throw Error(ErrorKind::numerical, "chisq_cdf: x must be >= 0");
  return gamma_p(0.5 * k, 0.5 * x);
}

double chisq_sf(double x, int k) {
  if (k < 1) throw Error(ErrorKind::numerical, "chisq_sf: degrees of freedom must be >= 1");
  if (!(x >= 0.0)) throw Error(ErrorKind::numerical, "chisq_sf: x must be >= 0");
  return gamma_q(0.5 * k, 0.5 * x);
}

double chisq_quantile(double p, int k) {
  if (k < 1) throw Error(ErrorKind::numerical, "chisq_quantile: degrees of freedom must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::numerical, "chisq_quantile: p must lie in (0, 1)");
  const double a = 0.5 * k;
  auto density = [&](double x) {
    return std::exp((a - 1.0) * std::log(x) - 0.5 * x - a * std::numbers::ln2 - std::lgamma(a));
  };
  // Wilson-Hilferty start.
  const double z = normal_quantile(p);
  const double h = 2.0 / (9.0 * k);
  double x = k * std::pow(std::max(1.0 - h + z * std::sqrt(h), 1e-3), 3);

  double lo = 0.0, hi = std::max(2.0 * x, 1.0);
  while (chisq_cdf(hi, k) < p) hi *= 2.0;
  x = std::clamp(x, lo, hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = chisq_cdf(x, k) - p;
    if (std::abs(f) <= 1e-14) break;
    if (f < 0) lo = x;
    else hi = x;
    const double dens = x > 0 ? density(x) : 0.0;
    double next = dens > 0 ? x - f / dens : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1.0, x)) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Rectangle probabilities

void MvnConfig::validate() const {
  if (min_points < 1 || max_points < min_points) throw Error(ErrorKind::config, "mvn: invalid point budget");
  if (shifts < 2) throw Error(ErrorKind::config, "mvn: need at least two random shifts");
  if (!(target_se > 0.0)) throw Error(ErrorKind::config, "mvn: target standard error must be positive");
  if (jitter.empty()) throw Error(ErrorKind::config, "mvn: jitter schedule must not be empty");
}

void check_correlation(const Eigen::MatrixXd& r) {
  if (r.rows() != r.cols() || r.rows() < 1) throw Error(ErrorKind::validation, "correlation matrix must be square");
  if (!r.allFinite()) throw Error(ErrorKind::validation, "correlation matrix has non-finite entries");
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    if (std::abs(r(i, i) - 1.0) > 1e-8) throw Error(ErrorKind::validation, "correlation matrix needs a unit diagonal");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(r(i, j) - r(j, i)) > 1e-8) throw Error(ErrorKind::validation, "correlation matrix is not symmetric");
    }
  }
}

namespace {

std::vector<double> lattice_generators(int count) {
  // Fractional parts of sqrt(prime): a Richtmyer (Kronecker) lattice.
  std::vector<double> out;
  for (int candidate = 2; static_cast<int>(out.size()) < count; ++candidate) {
    bool prime = true;
    for (int d = 2; d * d <= candidate; ++d) {
      if (candidate % d == 0) {
        prime = false;
        break;
      }
    }
    if (!prime) continue;
    const double s = std::sqrt(static_cast<double>(candidate));
    out.push_back(s - std::floor(s));
  }
  return out;
}

// Pivoted Cholesky that orders variables by largest remaining conditional
// variance. For symmetric limits this matches the smallest-conditional-
// probability-first ordering. Returns false if a pivot is not positive.
bool pivoted_cholesky(Eigen::MatrixXd a, Eigen::MatrixXd& l) {
  const auto k = a.rows();
  l = Eigen::MatrixXd::Zero(k, k);
  const double floor = 1e-14;
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::Index pivot = i;
    for (Eigen::Index j = i + 1; j < k; ++j) {
      if (a(j, j) > a(pivot, pivot)) pivot = j;
    }
    if (pivot != i) {
      a.row(i).swap(a.row(pivot));
      a.col(i).swap(a.col(pivot));
      l.row(i).swap(l.row(pivot));
    }
    if (!(a(i, i) > floor)) return false;
    const double lii = std::sqrt(a(i, i));
    l(i, i) = lii;
    for (Eigen::Index j = i + 1; j < k; ++j) l(j, i) = a(j, i) / lii;
    for (Eigen::Index j = i + 1; j < k; ++j) {
      for (Eigen::Index m = i + 1; m <= j; ++m) {
        a(j, m) -= l(j, i) * l(m, i);
        a(m, j) = a(j, m);
      }
    }
  }
  return true;
}

// P(lo < Z < hi) and a draw from the truncated normal at quantile w. When the
// interval lies in the upper tail the computation is reflected to keep
// precision.
struct Truncated {
  double prob;
  double draw;
};

Truncated truncated_normal(double lo, double hi, double w, bool need_draw) {
  constexpr double p_floor = 1e-300;
  constexpr double p_ceil = 1.0 - 1e-16;
  if (lo > 0.0) {
    const double a = normal_cdf(-hi), b = normal_cdf(-lo);
    const double prob = b - a;
    if (!need_draw || prob <= 0.0) return {std::max(prob, 0.0), lo};
    const double u = std::clamp(a + (1.0 - w) * prob, p_floor, p_ceil);
    return {prob, -normal_quantile(u)};
  }
  const double a = normal_cdf(lo), b = normal_cdf(hi);
  const double prob = b - a;
  if (!need_draw || prob <= 0.0) return {std::max(prob, 0.0), hi};
  const double u = std::clamp(a + w * prob, p_floor, p_ceil);
  return {prob, normal_quantile(u)};
}

}  // namespace

RectangleProbability::RectangleProbability(const Eigen::MatrixXd& correlation, MvnConfig config)
    : config_(std::move(config)) {
  config_.validate();
  check_correlation(correlation);
  const auto k = correlation.rows();
  bool ok = false;
  for (double eps : config_.jitter) {
    Eigen::MatrixXd a = correlation;
    a.diagonal().array() += eps;
    if (pivoted_cholesky(a, chol_)) {
      jitter_ = eps;
      ok = true;
      break;
    }
  }
  if (!ok) throw Error(ErrorKind::numerical, "correlation matrix is not positive semidefinite after jitter");

  const int dims = static_cast<int>(k) - 1;
  generators_ = lattice_generators(std::max(dims, 0));
  std::uint64_t state = config_.seed;
  offsets_.assign(static_cast<std::size_t>(config_.shifts), std::vector<double>(static_cast<std::size_t>(dims)));
  for (auto& shift : offsets_) {
    for (auto& o : shift) o = uniform01(state);
  }
}

double RectangleProbability::integrate_shift(double t, int points, int shift) const {
  const auto k = chol_.rows();
  const auto& offset = offsets_[static_cast<std::size_t>(shift)];
  std::vector<double> y(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (int i = 1; i <= points; ++i) {
    double f = 1.0;
    for (Eigen::Index v = 0; v < k; ++v) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < v; ++j) s += chol_(v, j) * y[j];
      const double lo = (-t - s) / chol_(v, v);
      const double hi = (t - s) / chol_(v, v);
      const bool last = v + 1 == k;
      double w = 0.0;
      if (!last) {
        const double x = std::fmod(static_cast<double>(i) * generators_[v] + offset[v], 1.0);
        w = 1.0 - std::abs(2.0 * x - 1.0);  // baker's transform
      }
      const auto tn = truncated_normal(lo, hi, w, !last);
      f *= tn.prob;
      if (f == 0.0) break;
      y[v] = tn.draw;
    }
    sum += f;
  }
  return sum / static_cast<double>(points);
}

MvnResult RectangleProbability::combine(const std::vector<double>& per_shift, int points) const {
  const double m = static_cast<double>(per_shift.size());
  double mean = 0.0;
  for (double v : per_shift) mean += v;
  mean /= m;
  double ss = 0.0;
  for (double v : per_shift) ss += (v - mean) * (v - mean);
  MvnResult out;
  out.estimate = std::clamp(mean, 0.0, 1.0);
  out.std_error = std::sqrt(ss / (m - 1.0) / m);
  out.points = points;
  out.precision_ok = out.std_error <= config_.target_se;
  return out;
}

MvnResult RectangleProbability::evaluate(double t, int points) const {
  if (!(t > 0.0)) return MvnResult{0.0, 0.0, points, true};
  std::vector<double> per_shift(static_cast<std::size_t>(config_.shifts));
  const int shifts = config_.shifts;
#pragma omp parallel for schedule(static) if (config_.parallel)
  for (int s = 0; s < shifts; ++s) per_shift[static_cast<std::size_t>(s)] = integrate_shift(t, points, s);
  return combine(per_shift, points);
}

MvnResult RectangleProbability::evaluate_serial(double t, int points) const {
  if (!(t > 0.0)) return MvnResult{0.0, 0.0, points, true};
  std::vector<double> per_shift(static_cast<std::size_t>(config_.shifts));
  for (int s = 0; s < config_.shifts; ++s) per_shift[static_cast<std::size_t>(s)] = integrate_shift(t, points, s);
  return combine(per_shift, points);
}

MvnResult RectangleProbability::evaluate(double t) const {
  int points = config_.min_points;
  MvnResult r = evaluate(t, points);
  while (!r.precision_ok && points < config_.max_points) {
    points = std::min(points * 2, config_.max_points);
    r = evaluate(t, points);
  }
  return r;
}

MvnResult mvn_rect_prob(double t, const Eigen::MatrixXd& correlation, const MvnConfig& config) {
  if (!(t >= 0.0)) throw Error(ErrorKind::numerical, "mvn_rect_prob: t must be >= 0");
  return RectangleProbability(correlation, config).evaluate(t);
}

MvnQuantile mvn_rect_quantile(double p, const RectangleProbability& g, double tol) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::numerical, "mvn_rect_quantile: p must lie in (0, 1)");
  const int k = g.dimension();
  double lo = normal_quantile(0.5 * (1.0 + p));
  double hi = normal_quantile(1.0 - (1.0 - p) / (2.0 * k));
  if (k == 1 || hi - lo <= tol) {
    return MvnQuantile{lo, g.evaluate(lo)};
  }
  // Fix the lattice size at the bracket midpoint, then bisect with common
  // random numbers.
  const int points = g.evaluate(0.5 * (lo + hi)).points;
  MvnResult at_lo = g.evaluate(lo, points);
  if (at_lo.estimate >= p) return MvnQuantile{lo, at_lo};
  MvnResult at_hi = g.evaluate(hi, points);
  if (at_hi.estimate <= p) {
    if (p - at_hi.estimate > std::max(1e-4, 3.0 * at_hi.std_error)) {
      throw Error(ErrorKind::numerical, "mvn_rect_quantile: Bonferroni bound does not bracket the quantile");
    }
    return MvnQuantile{hi, at_hi};
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    MvnResult at_mid = g.evaluate(mid, points);
    if (at_mid.estimate < p) {
      lo = mid;
      at_lo = at_mid;
    } else {
      hi = mid;
      at_hi = at_mid;
    }
  }
  // Report the upper end so that g(t) >= p holds for the returned threshold.
  return MvnQuantile{hi, at_hi};
}

MvnQuantile mvn_rect_quantile(double p, const Eigen::MatrixXd& correlation, const MvnConfig& config) {
  return mvn_rect_quantile(p, RectangleProbability(correlation, config));
}

}  // namespace lmtp
