#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include "lmtp/data_model.hpp"

namespace lmtp {

// Callback signatures receive the flattened history row (see history_features)
// and the zero-based time index.
using BoundCallback = std::function<double(std::span<const double> history, int t)>;
using PolicyCallback = std::function<double(double a, std::span<const double> history, int t)>;

// Where the per-row lower bound u_t(h_t) of a bounded shift comes from.
struct NoBound {};
struct ConstantBound {
  double value;
};
// Column j (zero-based) of the covariate block L_t at the current time.
struct CovariateBound {
  int column;
};
struct CallbackBound {
  BoundCallback fn;
};
using BoundSource = std::variant<NoBound, ConstantBound, CovariateBound, CallbackBound>;

struct Identity {};
// d(a, h) = a - delta when a - delta >= u(h), else a.
struct AdditiveShift {
  double delta = 0.0;
  BoundSource bound = NoBound{};
};
// d(a, h) = max(a, floor).
struct Threshold {
  double floor = 0.0;
};
struct Custom {
  PolicyCallback fn;
  bool depends_on_history = true;
};

/// A modified treatment policy d(a_t, h_t). Immutable value type.
class Policy {
 public:
  using Variant = std::variant<Identity, AdditiveShift, Threshold, Custom>;

  Policy() : variant_(Identity{}), label_("identity") {}
  Policy(Variant v, std::string label) : variant_(std::move(v)), label_(std::move(label)) {}

  static Policy identity() { return {}; }
  // Adds `change` to every exposure (so shift(-1) lowers exposure by one).
  static Policy shift(double change);
  static Policy bounded_shift(double change, BoundSource bound, std::string label = {});
  static Policy threshold(double floor);
  static Policy custom(PolicyCallback fn, bool depends_on_history, std::string label);

  const Variant& variant() const { return variant_; }
  const std::string& label() const { return label_; }

  // Structural check on the declared variant; a zero shift is not identity.
  bool is_identity() const { return std::holds_alternative<Identity>(variant_); }
  bool needs_bound() const;
  bool depends_on_history() const;

  /// Intervened exposure for one row. `bound` is required when the policy is a
  /// bounded shift.
  double apply(double a, std::span<const double> history, int t,
               std::optional<double> bound = std::nullopt) const;

  /// Intervened exposures A_t^d for every individual, resolving bound sources
  /// against the dataset.
  VectorXd intervene(const LongitudinalDataset& data, int t) const;
  VectorXd intervene(const LongitudinalDataset& data, int t, const MatrixXd& history) const;

 private:
  Variant variant_;
  std::string label_;
};

/// Parses the CLI syntax: "identity", "shift:<change>",
/// "shift:<change>,bound=<number>", "shift:<change>,bound=L{t}_<j>",
/// "threshold:<floor>".
Policy parse_policy(const std::string& spec);

}  // namespace lmtp
