#include "lmtp/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <sstream>

#include "lmtp/random.hpp"

namespace lmtp {

namespace {

// Structural mean functions. Time indices are zero-based; `y_prev` is unused
// at t = 0.
double mean_l(const DgpParams& p, int t, double l_prev, double a_prev, double y_prev) {
  if (t == 0) return 1.0;
  return 5.0 + 0.47 * l_prev - 0.24 * a_prev - 0.05 * y_prev - 0.3 * p.v[t];
}

double mean_a(const DgpParams& p, int t, double l, double a_prev, double y_prev) {
  if (t == 0) return 8.5 - l;
  return 10.0 - 0.2 * l + 0.1 * a_prev - 0.05 * y_prev + 0.5 * p.v[t];
}

double mean_y(const DgpParams& p, int t, double l, double a, double y_prev) {
  const double g = p.gamma[static_cast<std::size_t>(t)];
  if (t == 0) return 70.5 + g * (-l + p.alpha * a);
  const double v = p.v[t];
  return 78.0 + g * (-0.5 * l + p.alpha * a - 0.15 * y_prev) - 0.3 * v - 0.2 * v * v - 0.1 * v * v * v -
         p.beta * (0.1 * v + 0.04 * v * v + 0.02 * v * v * v) * a;
}

// E[Y_t | L_s = l, A_s = a, Y_{s-1} = y_prev] when exposures after s are moved
// by `change`. The system is linear, so conditional means propagate through
// the mean functions.
double propagate(const DgpParams& p, int s, int t, double l, double a, double y_prev, double change) {
  double y = mean_y(p, s, l, a, y_prev);
  for (int u = s + 1; u <= t; ++u) {
    const double l_next = mean_l(p, u, l, a, y);
    const double a_next = mean_a(p, u, l_next, a, y) + change;
    y = mean_y(p, u, l_next, a_next, y);
    l = l_next;
    a = a_next;
  }
  return y;
}

}  // namespace

void DgpParams::validate() const {
  if (v.empty()) throw Error(ErrorKind::config, "simulation needs at least one assessment time");
  if (!gamma.empty() && gamma.size() != v.size())
    throw Error(ErrorKind::config, "gamma must have one entry per assessment time");
  if (!(beta >= 0.0)) throw Error(ErrorKind::config, "beta must be nonnegative");
}

DgpParams study_params(double beta) {
  DgpParams p;
  p.gamma = calibrate_gamma(p);
  p.beta = beta;
  return p;
}

MeanPath analytic_means(const DgpParams& params, double change) {
  params.validate();
  if (params.gamma.size() != params.v.size()) throw Error(ErrorKind::calibration, "gamma has not been calibrated");
  const int tau = params.tau();
  MeanPath m{VectorXd(tau), VectorXd(tau), VectorXd(tau)};
  for (int t = 0; t < tau; ++t) {
    const double l_prev = t > 0 ? m.L(t - 1) : 0.0;
    const double a_prev = t > 0 ? m.A(t - 1) : 0.0;
    const double y_prev = t > 0 ? m.Y(t - 1) : 0.0;
    m.L(t) = mean_l(params, t, l_prev, a_prev, y_prev);
    m.A(t) = mean_a(params, t, m.L(t), a_prev, y_prev) + change;
    m.Y(t) = mean_y(params, t, m.L(t), m.A(t), y_prev);
  }
  return m;
}

AnalyticTruth analytic_truth(const DgpParams& params) {
  AnalyticTruth out;
  out.theta_prime = analytic_means(params, 0.0).Y;
  out.theta_dprime = analytic_means(params, params.shift).Y;
  const int tau = params.tau();
  out.delta.resize(std::max(tau - 1, 0));
  for (int j = 1; j < tau; ++j)
    out.delta(j - 1) = out.theta_dprime(j) - out.theta_dprime(0) - (out.theta_prime(j) - out.theta_prime(0));
  out.gamma = params.gamma;
  return out;
}

std::vector<double> calibrate_gamma(const DgpParams& params) {
  DgpParams p = params;
  p.beta = 0.0;
  p.gamma.assign(p.v.size(), 1.0);
  for (int t = 0; t < p.tau(); ++t) {
    p.gamma[static_cast<std::size_t>(t)] = 1.0;
    const double diff = analytic_means(p, p.shift).Y(t) - analytic_means(p, 0.0).Y(t);
    if (!(std::abs(diff) > 1e-12))
      throw Error(ErrorKind::calibration, "calibration: the two policies have equal means at time " +
                                              std::to_string(t + 1));
    p.gamma[static_cast<std::size_t>(t)] = -p.alpha / diff;
  }
  return p.gamma;
}

LongitudinalDataset generate(const DgpParams& params, std::size_t n, std::uint64_t seed, bool intervened) {
  params.validate();
  if (params.gamma.size() != params.v.size()) throw Error(ErrorKind::calibration, "gamma has not been calibrated");
  const int tau = params.tau();
  const auto rows = static_cast<Eigen::Index>(n);
  std::vector<MatrixXd> covariates(static_cast<std::size_t>(tau), MatrixXd(rows, 1));
  MatrixXd a(rows, tau);
  MatrixXd y(rows, tau);
  const double change = intervened ? params.shift : 0.0;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (int t = 0; t < tau; ++t) {
      const double l_prev = t > 0 ? covariates[t - 1](i, 0) : 0.0;
      const double a_prev = t > 0 ? a(i, t - 1) : 0.0;
      const double y_prev = t > 0 ? y(i, t - 1) : 0.0;
      const double l = mean_l(params, t, l_prev, a_prev, y_prev) + noise(rng);
      const double at = mean_a(params, t, l, a_prev, y_prev) + noise(rng) + change;
      covariates[static_cast<std::size_t>(t)](i, 0) = l;
      a(i, t) = at;
      y(i, t) = mean_y(params, t, l, at, y_prev) + noise(rng);
    }
  }
  return LongitudinalDataset(std::move(covariates), std::move(a), std::move(y), params.v);
}

// ---------------------------------------------------------------------------

DgpOracleNuisance::DgpOracleNuisance(DgpParams params) : params_(std::move(params)) {
  params_.validate();
  if (params_.gamma.size() != params_.v.size())
    throw Error(ErrorKind::calibration, "oracle nuisances need calibrated gamma");
}

double DgpOracleNuisance::change_for(const Policy& policy) const {
  if (policy.is_identity()) return 0.0;
  const auto* shift = std::get_if<AdditiveShift>(&policy.variant());
  if (shift == nullptr || !std::holds_alternative<NoBound>(shift->bound) || -shift->delta != params_.shift)
    throw Error(ErrorKind::config, "oracle nuisances only support the identity policy and the study shift");
  return params_.shift;
}

VectorXd DgpOracleNuisance::exposure_mean(const LongitudinalDataset& data, int s) const {
  const auto n = static_cast<Eigen::Index>(data.n());
  VectorXd mu(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double l = data.covariates(s)(i, 0);
    const double a_prev = s > 0 ? data.exposures()(i, s - 1) : 0.0;
    const double y_prev = s > 0 ? data.outcomes()(i, s - 1) : 0.0;
    mu(i) = mean_a(params_, s, l, a_prev, y_prev);
  }
  return mu;
}

RatioEstimate DgpOracleNuisance::ratio(const LongitudinalDataset& data, const Policy& policy, int s) const {
  const double c = change_for(policy);
  const VectorXd mu = exposure_mean(data, s);
  RatioEstimate out;
  out.ratio.resize(mu.size());
  // Density of A + c at a over the density of A at a, A ~ N(mu, 1).
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    out.ratio(i) = std::exp(c * (data.exposures()(i, s) - mu(i)) - 0.5 * c * c);
  return out;
}

RegressionPredictions DgpOracleNuisance::regress(const LongitudinalDataset& data, const Policy& policy, int s, int t,
                                                 const VectorXd&) const {
  const double c = change_for(policy);
  const auto n = static_cast<Eigen::Index>(data.n());
  RegressionPredictions out;
  out.natural.resize(n);
  out.intervened.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double l = data.covariates(s)(i, 0);
    const double a = data.exposures()(i, s);
    const double y_prev = s > 0 ? data.outcomes()(i, s - 1) : 0.0;
    out.natural(i) = propagate(params_, s, t, l, a, y_prev, c);
    out.intervened(i) = propagate(params_, s, t, l, a + c, y_prev, c);
  }
  return out;
}

// ---------------------------------------------------------------------------

StudyGrid parse_grid(const std::string& text, StudyGrid base) {
  std::istringstream in(text);
  std::string item;
  auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, ',')) {
      if (cur.empty()) throw Error(ErrorKind::config, "grid: empty list entry in '" + s + "'");
      parts.push_back(cur);
    }
    if (parts.empty()) throw Error(ErrorKind::config, "grid: empty list");
    return parts;
  };
  while (in >> item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::config, "grid: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      if (key == "n") {
        base.n.clear();
        for (const auto& s : split(value)) {
          const long long v = std::stoll(s);
          if (v < 2) throw Error(ErrorKind::config, "grid: n must be at least 2");
          base.n.push_back(static_cast<std::size_t>(v));
        }
      } else if (key == "beta") {
        base.beta.clear();
        for (const auto& s : split(value)) {
          const double b = std::stod(s);
          if (!(b >= 0.0)) throw Error(ErrorKind::config, "grid: beta must be nonnegative");
          base.beta.push_back(b);
        }
      } else if (key == "reps") {
        base.replicates = std::stoi(value);
        if (base.replicates < 1) throw Error(ErrorKind::config, "grid: reps must be positive");
      } else {
        throw Error(ErrorKind::config, "grid: unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw Error(ErrorKind::config, "grid: cannot parse '" + item + "'");
    } catch (const std::out_of_range&) {
      throw Error(ErrorKind::config, "grid: value out of range in '" + item + "'");
    }
  }
  return base;
}

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t n, double beta, int replicate) {
  return derive_seed(seed, {static_cast<std::uint64_t>(n), double_bits(beta), static_cast<std::uint64_t>(replicate)});
}

ReplicateRecord run_replicate(const StudyConfig& config, const DgpParams& params, const VectorXd& truth,
                              std::size_t n, int replicate) {
  ReplicateRecord rec;
  rec.n = n;
  rec.beta = params.beta;
  rec.replicate = replicate;
  rec.seed = replicate_seed(config.seed, n, params.beta, replicate);
  try {
    const LongitudinalDataset data = generate(params, n, rec.seed);
    SdrConfig sdr = make_sdr_config(config.learners, config.folds, rec.seed, config.ratio_p_min);
    sdr.parallel = false;
    MvnConfig mvn = config.mvn;
    mvn.parallel = false;
    mvn.seed = derive_seed(rec.seed, {0x6d766eULL});

    const StackedEstimate est = estimate_pair(data, Policy::identity(), Policy::shift(params.shift), sdr);
    const InferenceReport report = infer(est, build_contrast(ContrastKind::baseline, params.tau()), config.alpha, mvn);
    const int k = report.contrast.k();
    rec.delta_hat = report.contrast.nu_hat;
    rec.se = report.contrast.D_star.cwiseSqrt();
    rec.wald_p = report.wald.p;
    rec.max_p = report.max.p;
    rec.q_max = report.max.q;
    for (const auto& local : report.locals) {
      rec.p_unadjusted.push_back(local.p_unadjusted);
      rec.p_bonferroni.push_back(local.p_bonferroni);
      rec.p_max.push_back(local.p_max);
      const double truth_j = truth(local.j);
      auto covers = [truth_j](const Interval& ci) { return ci.lower <= truth_j && truth_j <= ci.upper; };
      rec.cover_pointwise.push_back(covers(local.ci_pointwise));
      rec.cover_bonferroni.push_back(covers(local.ci_bonferroni));
      rec.cover_max.push_back(covers(local.ci_max));
    }
    if (static_cast<int>(rec.p_max.size()) != k) throw Error(ErrorKind::estimation, "incomplete inference report");
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

CellSummary summarize(std::size_t n, double beta, const VectorXd& truth, const std::vector<ReplicateRecord>& records,
                      double alpha) {
  CellSummary cell;
  cell.n = n;
  cell.beta = beta;
  cell.truth = truth;
  const Eigen::Index k = truth.size();
  cell.mean_estimate = VectorXd::Zero(k);
  cell.mean_se = VectorXd::Zero(k);
  VectorXd sumsq = VectorXd::Zero(k);
  int ok = 0;
  for (const auto& r : records) {
    if (r.n != n || r.beta != beta) continue;
    ++cell.replicates;
    if (!r.ok) {
      ++cell.failures;
      continue;
    }
    ++ok;
    cell.mean_estimate += r.delta_hat;
    cell.mean_se += r.se;
    sumsq += r.delta_hat.cwiseAbs2();
    cell.wald_reject += r.wald_p <= alpha;
    cell.max_reject += r.max_p <= alpha;
    auto all_le = [alpha](const std::vector<double>& p) {
      return std::all_of(p.begin(), p.end(), [alpha](double x) { return x <= alpha; });
    };
    auto all_true = [](const std::vector<bool>& c) { return std::all_of(c.begin(), c.end(), [](bool b) { return b; }); };
    cell.simultaneous_power.none += all_le(r.p_unadjusted);
    cell.simultaneous_power.bonferroni += all_le(r.p_bonferroni);
    cell.simultaneous_power.max += all_le(r.p_max);
    cell.simultaneous_coverage.none += all_true(r.cover_pointwise);
    cell.simultaneous_coverage.bonferroni += all_true(r.cover_bonferroni);
    cell.simultaneous_coverage.max += all_true(r.cover_max);
  }
  if (ok == 0) {
    const double nan = std::nan("");
    cell.mean_estimate.setConstant(nan);
    cell.bias.setConstant(k, nan);
    cell.empirical_sd.setConstant(k, nan);
    cell.mean_se.setConstant(nan);
    cell.wald_reject = cell.max_reject = nan;
    cell.simultaneous_power = {nan, nan, nan};
    cell.simultaneous_coverage = {nan, nan, nan};
    return cell;
  }
  const double m = ok;
  cell.mean_estimate /= m;
  cell.mean_se /= m;
  cell.bias = cell.mean_estimate - truth;
  cell.empirical_sd = VectorXd::Zero(k);
  if (ok > 1) {
    const VectorXd var = (sumsq - m * cell.mean_estimate.cwiseAbs2()) / (m - 1.0);
    cell.empirical_sd = var.cwiseMax(0.0).cwiseSqrt();
  }
  cell.wald_reject /= m;
  cell.max_reject /= m;
  for (RuleRates* r : {&cell.simultaneous_power, &cell.simultaneous_coverage}) {
    r->none /= m;
    r->bonferroni /= m;
    r->max /= m;
  }
  return cell;
}

namespace {

struct Job {
  std::size_t n;
  std::size_t beta_index;
  int replicate;
};

StudyTables run_study_impl(const StudyConfig& config, bool parallel) {
  if (config.grid.n.empty() || config.grid.beta.empty() || config.grid.replicates < 1)
    throw Error(ErrorKind::config, "study grid is empty");
  StudyTables out;
  out.config = config;
  DgpParams base = config.dgp;
  if (base.gamma.empty()) base.gamma = calibrate_gamma(base);
  out.gamma = base.gamma;

  std::vector<DgpParams> params;
  std::vector<VectorXd> truths;
  for (double beta : config.grid.beta) {
    DgpParams p = base;
    p.beta = beta;
    params.push_back(p);
    truths.push_back(analytic_truth(p).delta);
  }

  std::vector<Job> jobs;
  for (std::size_t n : config.grid.n)
    for (std::size_t b = 0; b < config.grid.beta.size(); ++b)
      for (int r = 0; r < config.grid.replicates; ++r) jobs.push_back({n, b, r});

  out.records.resize(jobs.size());
  const auto count = static_cast<long long>(jobs.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (long long j = 0; j < count; ++j) {
    const Job& job = jobs[static_cast<std::size_t>(j)];
    out.records[static_cast<std::size_t>(j)] =
        run_replicate(config, params[job.beta_index], truths[job.beta_index], job.n, job.replicate);
  }

  for (std::size_t n : config.grid.n)
    for (std::size_t b = 0; b < config.grid.beta.size(); ++b)
      out.cells.push_back(summarize(n, config.grid.beta[b], truths[b], out.records, config.alpha));
  return out;
}

}  // namespace

StudyTables run_study(const StudyConfig& config) { return run_study_impl(config, config.parallel); }

StudyTables run_study_serial(const StudyConfig& config) { return run_study_impl(config, false); }

}  // namespace lmtp
