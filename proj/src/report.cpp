#include "lmtp/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace lmtp {

namespace {

std::vector<double> to_vec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Shortest round-trip text for a double; "nan" for NaN.
std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

std::string header_line(const RunConfig& config) {
  return "# config_hash=" + config_hash(config) + " seed=" + std::to_string(config.seed) + "\n";
}

Json interval_json(const Interval& ci) { return Json::array({ci.lower, ci.upper}); }

Json rates_json(const RuleRates& r) { return {{"none", r.none}, {"bonferroni", r.bonferroni}, {"max", r.max}}; }

}  // namespace

Json provenance_json(const RunConfig& config) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config_hash"] = config_hash(config);
  j["seed"] = config.seed;
  j["config"] = Json::parse(canonical_string(config));
  return j;
}

Json inference_json(const InferenceReport& report) {
  Json j;
  j["contrast_kind"] = to_string(report.kind);
  j["alpha"] = report.alpha;
  j["degenerate"] = report.degenerate;
  j["wald"] = {{"stat", report.wald.statistic}, {"df", report.wald.df}, {"p", report.wald.p},
               {"jitter", report.wald.jitter}};
  j["max"] = {{"stat", report.max.statistic},     {"p", report.max.p},
              {"q", report.max.q},                {"mc_error", report.max.mc_error},
              {"precision_ok", report.max.precision_ok}};
  Json locals = Json::array();
  for (const auto& l : report.locals) {
    locals.push_back({{"j", l.j + 1},
                      {"estimate", l.estimate},
                      {"se", l.se},
                      {"t", l.t},
                      {"p_unadj", l.p_unadjusted},
                      {"p_bonf", l.p_bonferroni},
                      {"p_max", l.p_max},
                      {"ci_pointwise", interval_json(l.ci_pointwise)},
                      {"ci_bonf", interval_json(l.ci_bonferroni)},
                      {"ci_max", interval_json(l.ci_max)}});
  }
  j["locals"] = std::move(locals);
  Json r = Json::array();
  for (Eigen::Index i = 0; i < report.contrast.R_star.rows(); ++i) r.push_back(to_vec(report.contrast.R_star.row(i)));
  j["R_star"] = std::move(r);
  return j;
}

Json trajectory_json(const TrajectoryEstimate& trajectory) {
  Json j;
  j["policy"] = trajectory.policy_label;
  j["theta_hat"] = to_vec(trajectory.theta);
  Json diag = Json::array();
  for (std::size_t t = 0; t < trajectory.diagnostics.size(); ++t) {
    const auto& d = trajectory.diagnostics[t];
    diag.push_back({{"t", t + 1},
                    {"ratio_clipped", d.ratio_clipped},
                    {"ratio_min", d.ratio_min},
                    {"ratio_max", d.ratio_max},
                    {"regression_weights", d.regression_weights},
                    {"out_of_range", d.out_of_range}});
  }
  j["diagnostics"] = std::move(diag);
  return j;
}

Json truth_json(const AnalyticTruth& truth, const DgpParams& params) {
  Json j;
  j["alpha"] = params.alpha;
  j["beta"] = params.beta;
  j["v"] = params.v;
  j["gamma"] = truth.gamma;
  j["theta_prime"] = to_vec(truth.theta_prime);
  j["theta_dprime"] = to_vec(truth.theta_dprime);
  j["delta"] = to_vec(truth.delta);
  return j;
}

Json study_json(const StudyTables& tables, bool include_records) {
  Json j;
  j["grid"] = {{"n", tables.config.grid.n}, {"beta", tables.config.grid.beta},
               {"replicates", tables.config.grid.replicates}};
  j["alpha"] = tables.config.alpha;
  j["gamma"] = tables.gamma;
  Json cells = Json::array();
  for (const auto& c : tables.cells) {
    cells.push_back({{"n", c.n},
                     {"beta", c.beta},
                     {"replicates", c.replicates},
                     {"failures", c.failures},
                     {"truth", to_vec(c.truth)},
                     {"mean_estimate", to_vec(c.mean_estimate)},
                     {"bias", to_vec(c.bias)},
                     {"empirical_sd", to_vec(c.empirical_sd)},
                     {"mean_se", to_vec(c.mean_se)},
                     {"wald_reject", c.wald_reject},
                     {"max_reject", c.max_reject},
                     {"type_i_error", c.beta == 0.0 ? Json(c.wald_reject) : Json()},
                     {"simultaneous_power", rates_json(c.simultaneous_power)},
                     {"simultaneous_coverage", rates_json(c.simultaneous_coverage)},
                     {"family_wise_error", c.beta == 0.0 ? rates_json({1.0 - c.simultaneous_coverage.none,
                                                                      1.0 - c.simultaneous_coverage.bonferroni,
                                                                      1.0 - c.simultaneous_coverage.max})
                                                         : Json()}});
  }
  j["cells"] = std::move(cells);
  Json failures = Json::array();
  for (const auto& r : tables.records)
    if (!r.ok) failures.push_back({{"n", r.n}, {"beta", r.beta}, {"replicate", r.replicate}, {"error", r.error}});
  j["failures"] = std::move(failures);
  if (include_records) {
    Json recs = Json::array();
    for (const auto& r : tables.records) {
      recs.push_back({{"n", r.n},
                      {"beta", r.beta},
                      {"replicate", r.replicate},
                      {"ok", r.ok},
                      {"delta_hat", to_vec(r.delta_hat)},
                      {"se", to_vec(r.se)},
                      {"wald_p", r.wald_p},
                      {"max_p", r.max_p},
                      {"p_max", r.p_max}});
    }
    j["records"] = std::move(recs);
  }
  return j;
}

Json error_json(const Error& error) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["error"] = {{"kind", to_string(error.kind())}, {"message", error.what()}};
  if (error.row()) j["error"]["row"] = *error.row();
  if (!error.column().empty()) j["error"]["column"] = error.column();
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::config, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorKind::config, "failed writing '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const Json& json) { write_text(path, json.dump(2) + "\n"); }

void write_trajectory_csv(const std::filesystem::path& path, const StackedEstimate& stacked,
                          const std::vector<double>& times, double alpha, const RunConfig& config) {
  const int tau = stacked.tau();
  const MatrixXd s = empirical_covariance(stacked);
  const double z = normal_quantile(1.0 - alpha / 2.0);
  std::ostringstream os;
  os << header_line(config);
  os << "t,v,theta_prime,se_prime,theta_dprime,se_dprime,difference,difference_lower,difference_upper\n";
  for (int t = 0; t < tau; ++t) {
    const double diff = stacked.theta(tau + t) - stacked.theta(t);
    const double var = s(t, t) + s(tau + t, tau + t) - 2.0 * s(t, tau + t);
    const double half = z * std::sqrt(std::max(var, 0.0));
    os << t + 1 << ',' << num(times.at(static_cast<std::size_t>(t))) << ',' << num(stacked.theta(t)) << ',' << num(std::sqrt(s(t, t))) << ','
       << num(stacked.theta(tau + t)) << ',' << num(std::sqrt(s(tau + t, tau + t))) << ',' << num(diff) << ','
       << num(diff - half) << ',' << num(diff + half) << '\n';
  }
  write_text(path, os.str());
}

void write_delta_csv(const std::filesystem::path& path, const InferenceReport& report, const RunConfig& config) {
  std::ostringstream os;
  os << header_line(config);
  os << "j,estimate,se,t,p_unadj,p_bonf,p_max,pointwise_lower,pointwise_upper,bonf_lower,bonf_upper,max_lower,"
        "max_upper\n";
  for (const auto& l : report.locals) {
    os << l.j + 1 << ',' << num(l.estimate) << ',' << num(l.se) << ',' << num(l.t) << ',' << num(l.p_unadjusted)
       << ',' << num(l.p_bonferroni) << ',' << num(l.p_max) << ',' << num(l.ci_pointwise.lower) << ','
       << num(l.ci_pointwise.upper) << ',' << num(l.ci_bonferroni.lower) << ',' << num(l.ci_bonferroni.upper)
       << ',' << num(l.ci_max.lower) << ',' << num(l.ci_max.upper) << '\n';
  }
  write_text(path, os.str());
}

void write_eif_csv(const std::filesystem::path& path, const StackedEstimate& stacked, const RunConfig& config) {
  std::ostringstream os;
  os << header_line(config);
  const int tau = stacked.tau();
  for (int t = 0; t < tau; ++t) os << (t ? "," : "") << "prime_" << t + 1;
  for (int t = 0; t < tau; ++t) os << ",dprime_" << t + 1;
  os << '\n';
  for (Eigen::Index i = 0; i < stacked.eif.rows(); ++i) {
    for (Eigen::Index c = 0; c < stacked.eif.cols(); ++c) os << (c ? "," : "") << num(stacked.eif(i, c));
    os << '\n';
  }
  write_text(path, os.str());
}

void write_study_csvs(const std::filesystem::path& dir, const StudyTables& tables, const RunConfig& config) {
  std::ostringstream bias, power, sim;
  bias << header_line(config) << "n,beta,j,truth,mean_estimate,bias,abs_bias,empirical_sd,mean_se,replicates,failures\n";
  power << header_line(config) << "n,beta,wald_reject,max_reject,replicates,failures\n";
  sim << header_line(config) << "n,beta,rule,simultaneous_power,simultaneous_coverage\n";
  for (const auto& c : tables.cells) {
    for (Eigen::Index j = 0; j < c.truth.size(); ++j) {
      bias << c.n << ',' << num(c.beta) << ',' << j + 1 << ',' << num(c.truth(j)) << ',' << num(c.mean_estimate(j))
           << ',' << num(c.bias(j)) << ',' << num(std::abs(c.bias(j))) << ',' << num(c.empirical_sd(j)) << ','
           << num(c.mean_se(j)) << ',' << c.replicates << ',' << c.failures << '\n';
    }
    power << c.n << ',' << num(c.beta) << ',' << num(c.wald_reject) << ',' << num(c.max_reject) << ','
          << c.replicates << ',' << c.failures << '\n';
    const std::pair<const char*, std::pair<double, double>> rules[] = {
        {"none", {c.simultaneous_power.none, c.simultaneous_coverage.none}},
        {"bonferroni", {c.simultaneous_power.bonferroni, c.simultaneous_coverage.bonferroni}},
        {"max", {c.simultaneous_power.max, c.simultaneous_coverage.max}}};
    for (const auto& [rule, rates] : rules)
      sim << c.n << ',' << num(c.beta) << ',' << rule << ',' << num(rates.first) << ',' << num(rates.second) << '\n';
  }
  write_text(dir / "bias_vs_n.csv", bias.str());
  write_text(dir / "power_vs_beta.csv", power.str());
  write_text(dir / "simultaneous.csv", sim.str());
}

// ---------------------------------------------------------------------------
// SVG

namespace {

struct Panel {
  double x0, y0, w, h;
  double xmin, xmax, ymin, ymax;

  double px(double x) const { return x0 + (xmax > xmin ? (x - xmin) / (xmax - xmin) : 0.5) * w; }
  double py(double y) const { return y0 + h - (ymax > ymin ? (y - ymin) / (ymax - ymin) : 0.5) * h; }
};

Panel make_panel(double x0, double xmin, double xmax, std::vector<double> ys) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double y : ys)
    if (std::isfinite(y)) lo = std::min(lo, y), hi = std::max(hi, y);
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  const double pad = hi > lo ? 0.08 * (hi - lo) : 1.0;
  return {x0, 40.0, 260.0, 240.0, xmin, xmax, lo - pad, hi + pad};
}

void polyline(std::ostringstream& os, const Panel& p, const std::vector<double>& x, const std::vector<double>& y,
              const char* colour) {
  os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < x.size(); ++i) os << p.px(x[i]) << ',' << p.py(y[i]) << ' ';
  os << "\"/>\n";
}

void band(std::ostringstream& os, const Panel& p, const std::vector<double>& x, const std::vector<double>& lo,
          const std::vector<double>& hi, const char* colour) {
  os << "<polygon fill=\"" << colour << "\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
  for (std::size_t i = 0; i < x.size(); ++i) os << p.px(x[i]) << ',' << p.py(hi[i]) << ' ';
  for (std::size_t i = x.size(); i-- > 0;) os << p.px(x[i]) << ',' << p.py(lo[i]) << ' ';
  os << "\"/>\n";
}

void frame(std::ostringstream& os, const Panel& p, const std::string& title) {
  os << "<rect x=\"" << p.x0 << "\" y=\"" << p.y0 << "\" width=\"" << p.w << "\" height=\"" << p.h
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  os << "<text x=\"" << p.x0 + p.w / 2 << "\" y=\"" << p.y0 - 12 << "\" text-anchor=\"middle\" font-size=\"13\">"
     << title << "</text>\n";
  os << "<text x=\"" << p.x0 - 4 << "\" y=\"" << p.y0 + 10 << "\" text-anchor=\"end\" font-size=\"10\">"
     << num(std::round(p.ymax * 100) / 100) << "</text>\n";
  os << "<text x=\"" << p.x0 - 4 << "\" y=\"" << p.y0 + p.h << "\" text-anchor=\"end\" font-size=\"10\">"
     << num(std::round(p.ymin * 100) / 100) << "</text>\n";
}

}  // namespace

std::string render_estimate_svg(const StackedEstimate& stacked, const InferenceReport& report,
                                const RunConfig& config) {
  const int tau = stacked.tau();
  std::vector<double> t(static_cast<std::size_t>(tau)), prime, dprime, diff;
  for (int i = 0; i < tau; ++i) {
    t[static_cast<std::size_t>(i)] = i + 1;
    prime.push_back(stacked.theta(i));
    dprime.push_back(stacked.theta(tau + i));
    diff.push_back(stacked.theta(tau + i) - stacked.theta(i));
  }
  std::vector<double> j, est, plo, phi, mlo, mhi;
  for (const auto& l : report.locals) {
    j.push_back(l.j + 1);
    est.push_back(l.estimate);
    plo.push_back(l.ci_pointwise.lower);
    phi.push_back(l.ci_pointwise.upper);
    mlo.push_back(l.ci_max.lower);
    mhi.push_back(l.ci_max.upper);
  }

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"320\" font-family=\"sans-serif\">\n";
  os << "<!-- config_hash=" << config_hash(config) << " seed=" << config.seed << " -->\n";

  std::vector<double> both = prime;
  both.insert(both.end(), dprime.begin(), dprime.end());
  const Panel a = make_panel(50, 1, tau, both);
  frame(os, a, "Trajectories");
  polyline(os, a, t, prime, "#1f77b4");
  polyline(os, a, t, dprime, "#d62728");

  const Panel b = make_panel(370, 1, tau, diff);
  frame(os, b, "Difference");
  polyline(os, b, t, diff, "#2ca02c");

  if (!j.empty()) {
    std::vector<double> all = mlo;
    all.insert(all.end(), mhi.begin(), mhi.end());
    all.push_back(0.0);
    const Panel c = make_panel(690, j.front(), j.back(), all);
    frame(os, c, "Contrasts");
    band(os, c, j, mlo, mhi, "#9467bd");
    band(os, c, j, plo, phi, "#9467bd");
    polyline(os, c, j, est, "#000");
    polyline(os, c, {j.front(), j.back()}, {0.0, 0.0}, "#888");
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace lmtp
