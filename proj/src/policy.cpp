#include "lmtp/policy.hpp"

#include <cmath>
#include <sstream>

namespace lmtp {

namespace {

std::string number_label(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (used != s.size()) return std::nullopt;
  return v;
}

}  // namespace

Policy Policy::shift(double change) {
  return Policy(AdditiveShift{-change, NoBound{}}, "shift:" + number_label(change));
}

Policy Policy::bounded_shift(double change, BoundSource bound, std::string label) {
  if (label.empty()) {
    label = "shift:" + number_label(change) + ",bound=";
    if (auto* c = std::get_if<ConstantBound>(&bound)) label += number_label(c->value);
    else if (auto* cb = std::get_if<CovariateBound>(&bound)) label += "L{t}_" + std::to_string(cb->column + 1);
    else label += "callback";
  }
  return Policy(AdditiveShift{-change, std::move(bound)}, std::move(label));
}

Policy Policy::threshold(double floor) {
  return Policy(Threshold{floor}, "threshold:" + number_label(floor));
}

Policy Policy::custom(PolicyCallback fn, bool depends_on_history, std::string label) {
  return Policy(Custom{std::move(fn), depends_on_history}, std::move(label));
}

bool Policy::needs_bound() const {
  if (auto* s = std::get_if<AdditiveShift>(&variant_)) return !std::holds_alternative<NoBound>(s->bound);
  return false;
}

bool Policy::depends_on_history() const {
  if (auto* s = std::get_if<AdditiveShift>(&variant_)) {
    return std::holds_alternative<CovariateBound>(s->bound) || std::holds_alternative<CallbackBound>(s->bound);
  }
  if (auto* c = std::get_if<Custom>(&variant_)) return c->depends_on_history;
  return false;
}

double Policy::apply(double a, std::span<const double> history, int t, std::optional<double> bound) const {
  struct Visitor {
    double a;
    std::span<const double> history;
    int t;
    std::optional<double> bound;
    const std::string& label;

    double operator()(const Identity&) const { return a; }
    double operator()(const AdditiveShift& s) const {
      const double shifted = a - s.delta;
      if (std::holds_alternative<NoBound>(s.bound)) return shifted;
      if (!bound) throw Error(ErrorKind::policy, "policy " + label + " requires a bound value");
      return shifted >= *bound ? shifted : a;
    }
    double operator()(const Threshold& th) const { return std::max(a, th.floor); }
    double operator()(const Custom& c) const {
      const double out = c.fn(a, history, t);
      if (!std::isfinite(out)) {
        throw Error(ErrorKind::policy, "policy " + label + " returned a non-finite exposure at time " +
                                           std::to_string(t));
      }
      return out;
    }
  };
  return std::visit(Visitor{a, history, t, bound, label_}, variant_);
}

VectorXd Policy::intervene(const LongitudinalDataset& data, int t) const {
  if (is_identity()) return data.exposure(t);
  return intervene(data, t, history_features(data, t));
}

VectorXd Policy::intervene(const LongitudinalDataset& data, int t, const MatrixXd& history) const {
  const auto n = static_cast<Eigen::Index>(data.n());
  VectorXd out(n);
  if (is_identity()) {
    out = data.exposure(t);
    return out;
  }
  // Row-major copy so that each history row is contiguous for the callbacks.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> h = history;
  const auto* shift = std::get_if<AdditiveShift>(&variant_);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::span<const double> row(h.data() + i * h.cols(), static_cast<std::size_t>(h.cols()));
    std::optional<double> bound;
    if (shift) {
      if (auto* c = std::get_if<ConstantBound>(&shift->bound)) {
        bound = c->value;
      } else if (auto* cb = std::get_if<CovariateBound>(&shift->bound)) {
        if (cb->column < 0 || cb->column >= data.covariate_count(t)) {
          throw Error(ErrorKind::policy, "policy " + label_ + " bound column L" + std::to_string(t + 1) + "_" +
                                             std::to_string(cb->column + 1) + " does not exist");
        }
        bound = data.covariates(t)(i, cb->column);
      } else if (auto* fb = std::get_if<CallbackBound>(&shift->bound)) {
        bound = fb->fn(row, t);
      }
    }
    out(i) = apply(data.exposures()(i, t), row, t, bound);
  }
  return out;
}

Policy parse_policy(const std::string& spec) {
  auto bad = [&](const std::string& why) {
    return Error(ErrorKind::config, "invalid policy '" + spec + "': " + why);
  };
  if (spec == "identity" || spec == "none") return Policy::identity();

  auto colon = spec.find(':');
  if (colon == std::string::npos) throw bad("expected identity, shift:<x> or threshold:<x>");
  const std::string kind = spec.substr(0, colon);
  std::string rest = spec.substr(colon + 1);

  if (kind == "threshold") {
    auto v = parse_number(rest);
    if (!v) throw bad("threshold needs a number");
    return Policy::threshold(*v);
  }
  if (kind != "shift") throw bad("unknown policy kind '" + kind + "'");

  std::string amount = rest, option;
  if (auto comma = rest.find(','); comma != std::string::npos) {
    amount = rest.substr(0, comma);
    option = rest.substr(comma + 1);
  }
  auto change = parse_number(amount);
  if (!change) throw bad("shift needs a number");
  if (option.empty()) return Policy::shift(*change);

  if (option.rfind("bound=", 0) != 0) throw bad("unknown shift option '" + option + "'");
  const std::string bound = option.substr(6);
  if (auto c = parse_number(bound)) return Policy::bounded_shift(*change, ConstantBound{*c}, spec);
  const std::string prefix = "L{t}_";
  if (bound.rfind(prefix, 0) == 0) {
    auto j = parse_number(bound.substr(prefix.size()));
    if (!j || *j < 1 || std::floor(*j) != *j) throw bad("bound column index must be a positive integer");
    return Policy::bounded_shift(*change, CovariateBound{static_cast<int>(*j) - 1}, spec);
  }
  throw bad("bound must be a number or L{t}_<j>");
}

}  // namespace lmtp
