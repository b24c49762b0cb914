#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lmtp/errors.hpp"

namespace lmtp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Task { regression, classification };
enum class Expansion { none, quadratic };

// Fitted models are immutable; predict is safe to call concurrently.
class Model {
 public:
  virtual ~Model() = default;
  // Regression: conditional mean. Classification: P(label = 1), clipped.
  virtual VectorXd predict(const MatrixXd& x) const = 0;
};

class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::unique_ptr<Model> fit(const MatrixXd& x, const VectorXd& y) const = 0;
  virtual std::string name() const = 0;
  virtual Task task() const = 0;
};

using LearnerPtr = std::shared_ptr<const Learner>;

// ---------------------------------------------------------------------------
// Linear models

// Standardizes the raw columns (training mean/sd, constant columns dropped)
// and optionally appends all squares and pairwise products. Column 0 of the
// output is the intercept.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(const MatrixXd& x, Expansion expansion);

  MatrixXd transform(const MatrixXd& x) const;
  Eigen::Index width() const;

 private:
  Expansion expansion_ = Expansion::none;
  std::vector<Eigen::Index> kept_;
  VectorXd mean_;
  VectorXd scale_;
};

class LinearModel final : public Model {
 public:
  LinearModel(FeatureMap map, VectorXd coef, bool logistic, double p_min, bool ridge_used)
      : map_(std::move(map)), coef_(std::move(coef)), logistic_(logistic), p_min_(p_min), ridge_used_(ridge_used) {}

  VectorXd predict(const MatrixXd& x) const override;
  const VectorXd& coefficients() const { return coef_; }
  bool ridge_used() const { return ridge_used_; }

 private:
  FeatureMap map_;
  VectorXd coef_;
  bool logistic_;
  double p_min_;
  bool ridge_used_;
};

/// Least squares on the (optionally expanded) design with an intercept. Falls
/// back to a small ridge (1e-6 x mean diagonal) when n does not exceed the
/// column count or the Gram matrix is ill conditioned.
LinearModel fit_ols(const MatrixXd& x, const VectorXd& y, Expansion expansion = Expansion::none);

/// Logistic regression by damped Newton iterations with a tiny ridge for
/// separated data. Labels must be 0/1.
LinearModel fit_logistic(const MatrixXd& x, const VectorXd& y, Expansion expansion = Expansion::none,
                         double p_min = 1e-3);

// ---------------------------------------------------------------------------
// Gradient boosted trees on binned features

struct BoostConfig {
  int rounds = 200;
  double learning_rate = 0.1;
  int max_depth = 1;  // stumps
  int min_leaf = 5;
  int max_bins = 64;
  Task task = Task::regression;
  double p_min = 1e-3;
};

class BoostedTrees final : public Model {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  BoostedTrees(double base, std::vector<Tree> trees, Task task, double p_min)
      : base_(base), trees_(std::move(trees)), task_(task), p_min_(p_min) {}

  VectorXd predict(const MatrixXd& x) const override;
  // Additive score before the link (log-odds for classification).
  VectorXd raw_score(const MatrixXd& x) const;
  std::size_t tree_count() const { return trees_.size(); }

 private:
  double base_;
  std::vector<Tree> trees_;
  Task task_;
  double p_min_;
};

/// Squared-loss (regression) or log-loss (classification) boosting with
/// depth-limited trees grown on quantile-binned features.
BoostedTrees fit_boosted_stumps(const MatrixXd& x, const VectorXd& y, const BoostConfig& config = {});

// ---------------------------------------------------------------------------
// Folds and stacking

/// Individual-level fold assignment; a pure function of (n, V, seed).
class FoldAssignment {
 public:
  // V = 1 means a single fold (no cross-fitting). Every fold must hold at least
  // two individuals unless V == n (explicit leave-one-out).
  static FoldAssignment make(std::size_t n, int folds, std::uint64_t seed);

  int folds() const { return folds_; }
  std::size_t n() const { return fold_.size(); }
  int fold_of(std::size_t i) const { return fold_[i]; }
  const std::vector<int>& assignment() const { return fold_; }
  std::vector<std::size_t> members(int v) const;

 private:
  int folds_ = 1;
  std::vector<int> fold_;
};

class StackModel final : public Model {
 public:
  StackModel(std::vector<std::unique_ptr<Model>> base, VectorXd weights, Task task, double p_min,
             bool uniform_fallback)
      : base_(std::move(base)), weights_(std::move(weights)), task_(task), p_min_(p_min),
        uniform_fallback_(uniform_fallback) {}

  VectorXd predict(const MatrixXd& x) const override;
  const VectorXd& weights() const { return weights_; }
  bool uniform_fallback() const { return uniform_fallback_; }

 private:
  std::vector<std::unique_ptr<Model>> base_;
  VectorXd weights_;
  Task task_;
  double p_min_;
  bool uniform_fallback_;
};

/// Super-learner style stack: out-of-fold predictions of each base learner are
/// combined with NNLS weights normalized to sum to one. If the normalized
/// combination has larger cross-validated risk than the best single learner,
/// all weight moves to that learner. An all-zero NNLS solution falls back to
/// uniform weights.
StackModel fit_stack(const std::vector<LearnerPtr>& learners, const MatrixXd& x, const VectorXd& y,
                     int folds, std::uint64_t seed, Task task, double p_min = 1e-3);

// ---------------------------------------------------------------------------
// Learner factories

LearnerPtr make_ols(Expansion expansion = Expansion::none);
LearnerPtr make_logistic(Expansion expansion = Expansion::none, double p_min = 1e-3);
LearnerPtr make_boosted(const BoostConfig& config);
LearnerPtr make_stack(std::vector<LearnerPtr> learners, int folds, std::uint64_t seed, Task task,
                      double p_min = 1e-3);

// ---------------------------------------------------------------------------
// Cross-fitting

/// One model per fold, each fitted without that fold's individuals. Rows of
/// the training design may belong to any individual; `individual` maps rows to
/// individuals.
class CrossFit {
 public:
  CrossFit(FoldAssignment folds, std::vector<std::unique_ptr<Model>> models)
      : folds_(std::move(folds)), models_(std::move(models)) {}

  const FoldAssignment& folds() const { return folds_; }
  const Model& model(int v) const { return *models_.at(v); }

  // Out-of-fold predictions for design rows; row r belongs to individual[r].
  VectorXd predict(const MatrixXd& x, std::span<const int> individual) const;
  // Row i belongs to individual i.
  VectorXd predict(const MatrixXd& x) const;

 private:
  FoldAssignment folds_;
  std::vector<std::unique_ptr<Model>> models_;
};

CrossFit crossfit(const MatrixXd& x, const VectorXd& y, std::span<const int> individual, const Learner& learner,
                  const FoldAssignment& folds);
CrossFit crossfit(const MatrixXd& x, const VectorXd& y, const Learner& learner, const FoldAssignment& folds);

// Rows of `x` (and entries of `y`) selected by index.
MatrixXd select_rows(const MatrixXd& x, std::span<const std::size_t> rows);
VectorXd select_rows(const VectorXd& y, std::span<const std::size_t> rows);

}  // namespace lmtp
