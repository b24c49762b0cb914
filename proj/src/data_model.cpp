#include "lmtp/data_model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace lmtp {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::schema: return "schema";
    case ErrorKind::data: return "data";
    case ErrorKind::validation: return "validation";
    case ErrorKind::config: return "config";
    case ErrorKind::policy: return "policy";
    case ErrorKind::estimation: return "estimation";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::calibration: return "calibration";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::estimation:
    case ErrorKind::numerical:
    case ErrorKind::calibration:
      return 1;
    default:
      return 2;
  }
}

namespace {

void require_finite(const MatrixXd& m, const std::string& what) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (!std::isfinite(m(i, j))) {
        throw Error(ErrorKind::data, what + " has a non-finite value at row " + std::to_string(i + 1),
                    static_cast<std::size_t>(i + 1), what);
      }
    }
  }
}

}  // namespace

LongitudinalDataset::LongitudinalDataset(std::vector<MatrixXd> covariates, MatrixXd exposures,
                                         MatrixXd outcomes, std::vector<double> assessment_times)
    : covariates_(std::move(covariates)),
      exposures_(std::move(exposures)),
      outcomes_(std::move(outcomes)),
      times_(std::move(assessment_times)) {
  const auto n = exposures_.rows();
  const auto tau = exposures_.cols();
  if (tau < 1) throw Error(ErrorKind::validation, "dataset needs at least one time point");
  if (n < 2) throw Error(ErrorKind::validation, "dataset needs at least two individuals");
  if (outcomes_.rows() != n || outcomes_.cols() != tau) {
    throw Error(ErrorKind::validation, "outcome matrix must be n x tau");
  }
  if (static_cast<Eigen::Index>(covariates_.size()) != tau) {
    throw Error(ErrorKind::validation, "need one covariate block per time point");
  }
  for (std::size_t t = 0; t < covariates_.size(); ++t) {
    if (covariates_[t].rows() != n) {
      throw Error(ErrorKind::validation,
                  "covariate block " + std::to_string(t + 1) + " must have n rows");
    }
    require_finite(covariates_[t], "L" + std::to_string(t + 1));
  }
  require_finite(exposures_, "A");
  require_finite(outcomes_, "Y");

  if (times_.empty()) {
    for (Eigen::Index t = 0; t < tau; ++t) times_.push_back(static_cast<double>(t + 1));
  }
  if (static_cast<Eigen::Index>(times_.size()) != tau) {
    throw Error(ErrorKind::validation, "assessment_times must have tau entries");
  }
  for (std::size_t t = 0; t < times_.size(); ++t) {
    if (!std::isfinite(times_[t]) || (t > 0 && !(times_[t] > times_[t - 1]))) {
      throw Error(ErrorKind::validation, "assessment times must be finite and strictly increasing");
    }
  }
}

void LongitudinalDataset::check_time(int t) const {
  if (t < 0 || t >= tau()) {
    throw Error(ErrorKind::validation,
                "time index " + std::to_string(t) + " out of range [0, " + std::to_string(tau()) + ")");
  }
}

int LongitudinalDataset::covariate_count(int t) const {
  check_time(t);
  return static_cast<int>(covariates_[t].cols());
}

const MatrixXd& LongitudinalDataset::covariates(int t) const {
  check_time(t);
  return covariates_[t];
}

bool LongitudinalDataset::operator==(const LongitudinalDataset& other) const {
  if (times_ != other.times_ || covariates_.size() != other.covariates_.size()) return false;
  if (exposures_.rows() != other.exposures_.rows() || exposures_.cols() != other.exposures_.cols())
    return false;
  if (exposures_ != other.exposures_ || outcomes_ != other.outcomes_) return false;
  for (std::size_t t = 0; t < covariates_.size(); ++t) {
    if (covariates_[t].cols() != other.covariates_[t].cols()) return false;
    if (covariates_[t] != other.covariates_[t]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

// Parses "<digits>" fully; returns 0 on failure (column indices start at 1).
int parse_index(std::string_view s) {
  if (s.empty()) return 0;
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 1) return 0;
  return v;
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return std::string(buf, ptr);
}

struct ColumnRef {
  enum Kind { covariate, exposure, outcome } kind;
  int t;  // one-based
  int j;  // one-based, covariates only
};

std::optional<ColumnRef> classify(const std::string& name, const CsvSchema& schema) {
  auto starts = [&](const std::string& p) { return name.size() > p.size() && name.compare(0, p.size(), p) == 0; };
  if (starts(schema.covariate_prefix)) {
    std::string_view rest(name);
    rest.remove_prefix(schema.covariate_prefix.size());
    auto us = rest.find('_');
    if (us != std::string_view::npos) {
      int t = parse_index(rest.substr(0, us));
      int j = parse_index(rest.substr(us + 1));
      if (t > 0 && j > 0) return ColumnRef{ColumnRef::covariate, t, j};
    }
  }
  if (starts(schema.exposure_prefix)) {
    int t = parse_index(std::string_view(name).substr(schema.exposure_prefix.size()));
    if (t > 0) return ColumnRef{ColumnRef::exposure, t, 0};
  }
  if (starts(schema.outcome_prefix)) {
    int t = parse_index(std::string_view(name).substr(schema.outcome_prefix.size()));
    if (t > 0) return ColumnRef{ColumnRef::outcome, t, 0};
  }
  return std::nullopt;
}

std::vector<double> parse_times(const std::string& spec) {
  std::vector<double> out;
  for (const auto& field : split(spec)) {
    auto v = parse_double(field);
    if (!v) throw Error(ErrorKind::validation, "bad assessment time '" + field + "' in '# v:' line");
    out.push_back(*v);
  }
  return out;
}

}  // namespace

LongitudinalDataset parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::vector<double> times;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    std::string s = trim(line);
    if (s.empty()) continue;
    if (s[0] == '#') {
      std::string body = trim(std::string_view(s).substr(1));
      if (body.rfind("v:", 0) == 0) times = parse_times(trim(std::string_view(body).substr(2)));
      continue;
    }
    header = split(s);
    break;
  }
  if (header.empty()) throw Error(ErrorKind::schema, "CSV has no header row");

  // Map each recognized column to its file position.
  std::map<int, int> exposure_col, outcome_col;
  std::map<int, std::map<int, int>> covariate_col;
  int tau = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    auto ref = classify(header[c], schema);
    if (!ref) continue;
    tau = std::max(tau, ref->t);
    int pos = static_cast<int>(c);
    bool dup = false;
    switch (ref->kind) {
      case ColumnRef::exposure: dup = !exposure_col.emplace(ref->t, pos).second; break;
      case ColumnRef::outcome: dup = !outcome_col.emplace(ref->t, pos).second; break;
      case ColumnRef::covariate: dup = !covariate_col[ref->t].emplace(ref->j, pos).second; break;
    }
    if (dup) throw Error(ErrorKind::schema, "duplicate column " + header[c], std::nullopt, header[c]);
  }
  if (tau == 0) throw Error(ErrorKind::schema, "no exposure/outcome columns found in header");

  std::vector<int> p(tau, 0);
  for (int t = 1; t <= tau; ++t) {
    auto need = [&](const std::map<int, int>& m, const std::string& prefix) {
      if (!m.count(t)) {
        std::string name = prefix + std::to_string(t);
        throw Error(ErrorKind::schema, "missing column " + name, std::nullopt, name);
      }
    };
    need(exposure_col, schema.exposure_prefix);
    need(outcome_col, schema.outcome_prefix);
    auto it = covariate_col.find(t);
    if (it != covariate_col.end()) {
      int pmax = it->second.rbegin()->first;
      for (int j = 1; j <= pmax; ++j) {
        if (!it->second.count(j)) {
          std::string name = schema.covariate_prefix + std::to_string(t) + "_" + std::to_string(j);
          throw Error(ErrorKind::schema, "missing column " + name, std::nullopt, name);
        }
      }
      p[t - 1] = pmax;
    }
  }

  std::vector<std::vector<double>> rows;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    ++row_no;
    auto fields = split(s);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::data,
                  "row " + std::to_string(row_no) + " has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(header.size()),
                  row_no, "");
    }
    std::vector<double> values(header.size(), 0.0);
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (!classify(header[c], schema)) continue;
      auto v = parse_double(fields[c]);
      if (!v) {
        throw Error(ErrorKind::data,
                    "missing or invalid value in column " + header[c] + " at row " + std::to_string(row_no),
                    row_no, header[c]);
      }
      values[c] = *v;
    }
    rows.push_back(std::move(values));
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  MatrixXd a(n, tau), y(n, tau);
  std::vector<MatrixXd> l(tau);
  for (int t = 1; t <= tau; ++t) l[t - 1].resize(n, p[t - 1]);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[i];
    for (int t = 1; t <= tau; ++t) {
      a(i, t - 1) = r[exposure_col[t]];
      y(i, t - 1) = r[outcome_col[t]];
      for (int j = 1; j <= p[t - 1]; ++j) l[t - 1](i, j - 1) = r[covariate_col[t][j]];
    }
  }
  return LongitudinalDataset(std::move(l), std::move(a), std::move(y), std::move(times));
}

LongitudinalDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::schema, "cannot open " + path.string());
  return parse_csv(in, schema);
}

void write_csv(const LongitudinalDataset& data, std::ostream& out, const CsvSchema& schema) {
  out << "# v: ";
  const auto& v = data.assessment_times();
  for (std::size_t t = 0; t < v.size(); ++t) out << (t ? "," : "") << format_double(v[t]);
  out << '\n';

  bool first = true;
  auto sep = [&]() -> std::ostream& {
    if (!first) out << ',';
    first = false;
    return out;
  };
  for (int t = 0; t < data.tau(); ++t) {
    for (int j = 0; j < data.covariate_count(t); ++j)
      sep() << schema.covariate_prefix << t + 1 << '_' << j + 1;
    sep() << schema.exposure_prefix << t + 1;
    sep() << schema.outcome_prefix << t + 1;
  }
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    first = true;
    for (int t = 0; t < data.tau(); ++t) {
      for (int j = 0; j < data.covariate_count(t); ++j) sep() << format_double(data.covariates(t)(i, j));
      sep() << format_double(data.exposures()(i, t));
      sep() << format_double(data.outcomes()(i, t));
    }
    out << '\n';
  }
}

void write_csv(const LongitudinalDataset& data, const std::filesystem::path& path, const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::validation, "cannot write " + path.string());
  write_csv(data, out, schema);
}

// ---------------------------------------------------------------------------

int history_width(const LongitudinalDataset& data, int t) {
  if (t < 0 || t >= data.tau()) {
    throw Error(ErrorKind::validation, "history time index " + std::to_string(t) + " out of range");
  }
  int q = 2 * t;
  for (int s = 0; s <= t; ++s) q += data.covariate_count(s);
  return q;
}

MatrixXd history_features(const LongitudinalDataset& data, int t) {
  const int q = history_width(data, t);
  const auto n = static_cast<Eigen::Index>(data.n());
  MatrixXd h(n, q);
  Eigen::Index c = 0;
  for (int s = 0; s < t; ++s) h.col(c++) = data.exposure(s);
  for (int s = 0; s <= t; ++s) {
    const auto& l = data.covariates(s);
    h.middleCols(c, l.cols()) = l;
    c += l.cols();
  }
  for (int s = 0; s < t; ++s) h.col(c++) = data.outcome(s);
  return h;
}

VectorXd column_means(const MatrixXd& m) {
  VectorXd out(m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    // Neumaier summation keeps the mean within a few ulps of the exact value.
    double sum = 0.0, comp = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double x = m(i, j);
      const double t = sum + x;
      comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
      sum = t;
    }
    out(j) = (sum + comp) / static_cast<double>(m.rows());
  }
  return out;
}

StackedEstimate stack(const TrajectoryEstimate& prime, const TrajectoryEstimate& dprime) {
  if (prime.theta.size() != dprime.theta.size() || prime.eif.rows() != dprime.eif.rows()) {
    throw Error(ErrorKind::validation, "trajectories to stack must share tau and n");
  }
  const auto tau = prime.theta.size();
  StackedEstimate out;
  out.label_prime = prime.policy_label;
  out.label_dprime = dprime.policy_label;
  out.theta.resize(2 * tau);
  out.theta << prime.theta, dprime.theta;
  out.eif.resize(prime.eif.rows(), 2 * tau);
  out.eif << prime.eif, dprime.eif;
  return out;
}

}  // namespace lmtp
