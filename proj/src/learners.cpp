#include "lmtp/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lmtp/nnls.hpp"
#include "lmtp/random.hpp"

namespace lmtp {

namespace {

VectorXd clip(VectorXd p, double p_min) {
  return p.cwiseMax(p_min).cwiseMin(1.0 - p_min);
}

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

MatrixXd select_rows(const MatrixXd& x, std::span<const std::size_t> rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
  return out;
}

VectorXd select_rows(const VectorXd& y, std::span<const std::size_t> rows) {
  VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = y(rows[r]);
  return out;
}

// ---------------------------------------------------------------------------
// FeatureMap

FeatureMap::FeatureMap(const MatrixXd& x, Expansion expansion) : expansion_(expansion) {
  const auto n = static_cast<double>(x.rows());
  std::vector<double> means, scales;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double m = x.col(j).sum() / n;
    const double var = (x.col(j).array() - m).square().sum() / n;
    if (var <= 1e-24 * std::max(1.0, m * m)) continue;
    kept_.push_back(j);
    means.push_back(m);
    scales.push_back(std::sqrt(var));
  }
  mean_ = Eigen::Map<VectorXd>(means.data(), static_cast<Eigen::Index>(means.size()));
  scale_ = Eigen::Map<VectorXd>(scales.data(), static_cast<Eigen::Index>(scales.size()));
}

Eigen::Index FeatureMap::width() const {
  const auto q = static_cast<Eigen::Index>(kept_.size());
  return 1 + q + (expansion_ == Expansion::quadratic ? q * (q + 1) / 2 : 0);
}

MatrixXd FeatureMap::transform(const MatrixXd& x) const {
  const auto q = static_cast<Eigen::Index>(kept_.size());
  MatrixXd out(x.rows(), width());
  out.col(0).setOnes();
  for (Eigen::Index k = 0; k < q; ++k) {
    out.col(1 + k) = (x.col(kept_[k]).array() - mean_(k)) / scale_(k);
  }
  if (expansion_ == Expansion::quadratic) {
    Eigen::Index c = 1 + q;
    for (Eigen::Index a = 0; a < q; ++a) {
      for (Eigen::Index b = a; b < q; ++b) {
        out.col(c++) = out.col(1 + a).cwiseProduct(out.col(1 + b));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear models

VectorXd LinearModel::predict(const MatrixXd& x) const {
  VectorXd eta = map_.transform(x) * coef_;
  if (!logistic_) return eta;
  for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = sigmoid(eta(i));
  return clip(std::move(eta), p_min_);
}

namespace {

void add_ridge(MatrixXd& gram, double lambda) {
  // The intercept (column 0) is not penalized.
  for (Eigen::Index j = 1; j < gram.rows(); ++j) gram(j, j) += lambda;
}

}  // namespace

LinearModel fit_ols(const MatrixXd& x, const VectorXd& y, Expansion expansion) {
  if (x.rows() != y.size() || x.rows() == 0) throw Error(ErrorKind::validation, "fit_ols: shape mismatch");
  FeatureMap map(x, expansion);
  const MatrixXd design = map.transform(x);
  const auto p = design.cols();
  MatrixXd gram = design.transpose() * design;
  const VectorXd rhs = design.transpose() * y;

  bool ridge = design.rows() <= p;
  VectorXd coef;
  if (!ridge) {
    Eigen::LLT<MatrixXd> llt(gram);
    if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) {
      coef = llt.solve(rhs);
    } else {
      ridge = true;
    }
  }
  if (ridge) {
    add_ridge(gram, 1e-6 * gram.trace() / static_cast<double>(p));
    Eigen::LDLT<MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::numerical, "fit_ols: ridge solve failed");
    coef = ldlt.solve(rhs);
  }
  if (!coef.allFinite()) throw Error(ErrorKind::numerical, "fit_ols: non-finite coefficients");
  return LinearModel(std::move(map), std::move(coef), false, 0.0, ridge);
}

LinearModel fit_logistic(const MatrixXd& x, const VectorXd& y, Expansion expansion, double p_min) {
  if (x.rows() != y.size() || x.rows() == 0) throw Error(ErrorKind::validation, "fit_logistic: shape mismatch");
  FeatureMap map(x, expansion);
  const MatrixXd design = map.transform(x);
  const auto n = design.rows();
  const auto p = design.cols();
  const double lambda = 1e-6;

  const double ybar = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
  VectorXd beta = VectorXd::Zero(p);
  beta(0) = std::log(ybar / (1.0 - ybar));

  auto penalized_loss = [&](const VectorXd& b) {
    const VectorXd eta = design * b;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // log(1 + exp(eta)) - y * eta, evaluated stably
      const double e = eta(i);
      loss += (e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e))) - y(i) * e;
    }
    return loss + 0.5 * lambda * b.tail(p - 1).squaredNorm();
  };

  double loss = penalized_loss(beta);
  for (int iter = 0; iter < 50; ++iter) {
    const VectorXd eta = design * beta;
    VectorXd prob(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = sigmoid(eta(i));
      w(i) = std::max(prob(i) * (1.0 - prob(i)), 1e-10);
    }
    VectorXd grad = design.transpose() * (y - prob);
    grad.tail(p - 1) -= lambda * beta.tail(p - 1);
    MatrixXd hess = design.transpose() * w.asDiagonal() * design;
    add_ridge(hess, lambda);
    Eigen::LDLT<MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::numerical, "fit_logistic: Newton system failed");
    const VectorXd step = ldlt.solve(grad);

    double scale = 1.0;
    VectorXd next = beta + step;
    double next_loss = penalized_loss(next);
    while (!(next_loss <= loss + 1e-12 * std::abs(loss)) && scale > 1e-6) {
      scale *= 0.5;
      next = beta + scale * step;
      next_loss = penalized_loss(next);
    }
    const double change = (next - beta).cwiseAbs().maxCoeff();
    beta = std::move(next);
    loss = next_loss;
    if (change < 1e-8) break;
  }
  if (!beta.allFinite()) throw Error(ErrorKind::numerical, "fit_logistic: non-finite coefficients");
  return LinearModel(std::move(map), std::move(beta), true, p_min, false);
}

// ---------------------------------------------------------------------------
// Boosted trees

namespace {

struct Binned {
  Eigen::Index n = 0;
  Eigen::Index q = 0;
  std::vector<std::vector<double>> cuts;  // per feature, strictly increasing
  std::vector<std::uint8_t> bins;         // column-major n x q
  std::vector<int> bin_count;             // per feature

  std::uint8_t at(Eigen::Index i, Eigen::Index f) const { return bins[static_cast<std::size_t>(f * n + i)]; }
};

Binned bin_features(const MatrixXd& x, int max_bins) {
  Binned b;
  b.n = x.rows();
  b.q = x.cols();
  b.cuts.resize(static_cast<std::size_t>(b.q));
  b.bins.resize(static_cast<std::size_t>(b.n * b.q));
  b.bin_count.resize(static_cast<std::size_t>(b.q));
  std::vector<double> sorted(static_cast<std::size_t>(b.n));
  for (Eigen::Index f = 0; f < b.q; ++f) {
    for (Eigen::Index i = 0; i < b.n; ++i) sorted[i] = x(i, f);
    std::sort(sorted.begin(), sorted.end());
    auto& cuts = b.cuts[f];
    const auto unique_end = std::unique(sorted.begin(), sorted.end());
    const auto unique_count = static_cast<std::size_t>(unique_end - sorted.begin());
    if (unique_count <= static_cast<std::size_t>(max_bins)) {
      for (std::size_t k = 1; k < unique_count; ++k) cuts.push_back(0.5 * (sorted[k - 1] + sorted[k]));
    } else {
      for (int k = 1; k < max_bins; ++k) {
        const std::size_t idx = k * unique_count / static_cast<std::size_t>(max_bins);
        const double c = 0.5 * (sorted[idx - 1] + sorted[idx]);
        if (cuts.empty() || c > cuts.back()) cuts.push_back(c);
      }
    }
    b.bin_count[f] = static_cast<int>(cuts.size()) + 1;
    for (Eigen::Index i = 0; i < b.n; ++i) {
      const auto pos = std::lower_bound(cuts.begin(), cuts.end(), x(i, f)) - cuts.begin();
      b.bins[static_cast<std::size_t>(f * b.n + i)] = static_cast<std::uint8_t>(pos);
    }
  }
  return b;
}

struct Split {
  double gain = 0.0;
  int feature = -1;
  int bin = -1;  // rows with bin <= this go left
};

class TreeGrower {
 public:
  TreeGrower(const Binned& binned, const BoostConfig& config) : binned_(binned), config_(config) {
    int max_bin = 1;
    for (int c : binned.bin_count) max_bin = std::max(max_bin, c);
    grad_hist_.resize(static_cast<std::size_t>(max_bin));
    hess_hist_.resize(static_cast<std::size_t>(max_bin));
    count_hist_.resize(static_cast<std::size_t>(max_bin));
  }

  // Grows one tree on the given gradients/hessians and adds the scaled leaf
  // values to `score`.
  BoostedTrees::Tree grow(const std::vector<double>& grad, const std::vector<double>& hess, std::vector<double>& score) {
    BoostedTrees::Tree tree;
    std::vector<std::size_t> rows(static_cast<std::size_t>(binned_.n));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    grow_node(tree, std::move(rows), 0, grad, hess, score);
    return tree;
  }

 private:
  static constexpr double kLambda = 1e-6;

  int grow_node(BoostedTrees::Tree& tree, std::vector<std::size_t> rows, int depth, const std::vector<double>& grad,
                const std::vector<double>& hess, std::vector<double>& score) {
    const int id = static_cast<int>(tree.size());
    tree.emplace_back();
    double g = 0.0, h = 0.0;
    for (auto i : rows) {
      g += grad[i];
      h += hess[i];
    }

    Split best;
    if (depth < config_.max_depth && rows.size() >= 2 * static_cast<std::size_t>(config_.min_leaf)) {
      best = find_split(rows, g, h, grad, hess);
    }
    if (best.feature < 0) {
      double value = -g / (h + kLambda);
      if (config_.task == Task::classification) value = std::clamp(value, -4.0, 4.0);
      value *= config_.learning_rate;
      tree[id].value = value;
      for (auto i : rows) score[i] += value;
      return id;
    }

    std::vector<std::size_t> left, right;
    left.reserve(rows.size());
    right.reserve(rows.size());
    for (auto i : rows) {
      (binned_.at(static_cast<Eigen::Index>(i), best.feature) <= best.bin ? left : right).push_back(i);
    }
    rows.clear();
    rows.shrink_to_fit();
    tree[id].feature = best.feature;
    tree[id].threshold = binned_.cuts[best.feature][best.bin];
    const int l = grow_node(tree, std::move(left), depth + 1, grad, hess, score);
    const int r = grow_node(tree, std::move(right), depth + 1, grad, hess, score);
    tree[id].left = l;
    tree[id].right = r;
    return id;
  }

  Split find_split(const std::vector<std::size_t>& rows, double g, double h, const std::vector<double>& grad,
                   const std::vector<double>& hess) {
    Split best;
    const double parent = g * g / (h + kLambda);
    for (Eigen::Index f = 0; f < binned_.q; ++f) {
      const int nb = binned_.bin_count[f];
      if (nb < 2) continue;
      std::fill_n(grad_hist_.begin(), nb, 0.0);
      std::fill_n(hess_hist_.begin(), nb, 0.0);
      std::fill_n(count_hist_.begin(), nb, 0);
      const std::uint8_t* col = binned_.bins.data() + f * binned_.n;
      for (auto i : rows) {
        const auto b = col[i];
        grad_hist_[b] += grad[i];
        hess_hist_[b] += hess[i];
        ++count_hist_[b];
      }
      double gl = 0.0, hl = 0.0;
      std::size_t cl = 0;
      for (int b = 0; b + 1 < nb; ++b) {
        gl += grad_hist_[b];
        hl += hess_hist_[b];
        cl += static_cast<std::size_t>(count_hist_[b]);
        const std::size_t cr = rows.size() - cl;
        if (cl < static_cast<std::size_t>(config_.min_leaf)) continue;
        if (cr < static_cast<std::size_t>(config_.min_leaf)) break;
        const double gr = g - gl, hr = h - hl;
        if (hl <= 1e-10 || hr <= 1e-10) continue;
        const double gain = gl * gl / (hl + kLambda) + gr * gr / (hr + kLambda) - parent;
        if (gain > best.gain * (1.0 + 1e-12) + 1e-12) {
          best = Split{gain, static_cast<int>(f), b};
        }
      }
    }
    return best;
  }

  const Binned& binned_;
  const BoostConfig& config_;
  std::vector<double> grad_hist_;
  std::vector<double> hess_hist_;
  std::vector<int> count_hist_;
};

double traverse(const BoostedTrees::Tree& tree, const MatrixXd& x, Eigen::Index i) {
  int node = 0;
  while (tree[node].feature >= 0) {
    node = x(i, tree[node].feature) <= tree[node].threshold ? tree[node].left : tree[node].right;
  }
  return tree[node].value;
}

}  // namespace

BoostedTrees fit_boosted_stumps(const MatrixXd& x, const VectorXd& y, const BoostConfig& config) {
  if (config.rounds < 1) throw Error(ErrorKind::config, "boosting needs at least one round");
  if (config.max_bins < 2 || config.max_bins > 256) throw Error(ErrorKind::config, "max_bins must be in [2, 256]");
  if (x.rows() != y.size() || x.rows() == 0) throw Error(ErrorKind::validation, "fit_boosted_stumps: shape mismatch");
  const auto n = x.rows();
  const Binned binned = bin_features(x, config.max_bins);

  double base = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) base += y(i);
  base /= static_cast<double>(n);
  if (config.task == Task::classification) {
    const double p = std::clamp(base, 1e-6, 1.0 - 1e-6);
    base = std::log(p / (1.0 - p));
  }

  std::vector<double> score(static_cast<std::size_t>(n), base);
  std::vector<double> grad(score.size()), hess(score.size(), 1.0);
  std::vector<BoostedTrees::Tree> trees;
  trees.reserve(static_cast<std::size_t>(config.rounds));
  TreeGrower grower(binned, config);
  for (int round = 0; round < config.rounds; ++round) {
    if (config.task == Task::regression) {
      for (Eigen::Index i = 0; i < n; ++i) grad[i] = score[i] - y(i);
    } else {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double p = sigmoid(score[i]);
        grad[i] = p - y(i);
        hess[i] = std::max(p * (1.0 - p), 1e-12);
      }
    }
    auto tree = grower.grow(grad, hess, score);
    // A single zero leaf means no further progress is possible.
    if (tree.size() == 1 && tree[0].value == 0.0) break;
    trees.push_back(std::move(tree));
  }
  return BoostedTrees(base, std::move(trees), config.task, config.p_min);
}

VectorXd BoostedTrees::raw_score(const MatrixXd& x) const {
  VectorXd out = VectorXd::Constant(x.rows(), base_);
  for (const auto& tree : trees_) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) += traverse(tree, x, i);
  }
  return out;
}

VectorXd BoostedTrees::predict(const MatrixXd& x) const {
  VectorXd out = raw_score(x);
  if (task_ == Task::regression) return out;
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = sigmoid(out(i));
  return clip(std::move(out), p_min_);
}

// ---------------------------------------------------------------------------
// Folds

FoldAssignment FoldAssignment::make(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 1) throw Error(ErrorKind::config, "fold count must be at least 1");
  if (static_cast<std::size_t>(folds) > n) throw Error(ErrorKind::config, "more folds than individuals");
  const bool loo = static_cast<std::size_t>(folds) == n;
  if (!loo && n / static_cast<std::size_t>(folds) < 2) {
    throw Error(ErrorKind::config, "fold with fewer than 2 individuals (n=" + std::to_string(n) +
                                       ", V=" + std::to_string(folds) + ")");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::uint64_t state = seed;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = splitmix64(state) % i;
    std::swap(perm[i - 1], perm[j]);
  }
  FoldAssignment out;
  out.folds_ = folds;
  out.fold_.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.fold_[perm[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
  return out;
}

std::vector<std::size_t> FoldAssignment::members(int v) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_.size(); ++i) {
    if (fold_[i] == v) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stacking

VectorXd StackModel::predict(const MatrixXd& x) const {
  VectorXd out = VectorXd::Zero(x.rows());
  for (std::size_t l = 0; l < base_.size(); ++l) {
    if (weights_(static_cast<Eigen::Index>(l)) == 0.0) continue;
    out += weights_(static_cast<Eigen::Index>(l)) * base_[l]->predict(x);
  }
  if (task_ == Task::classification) return clip(std::move(out), p_min_);
  return out;
}

StackModel fit_stack(const std::vector<LearnerPtr>& learners, const MatrixXd& x, const VectorXd& y, int folds,
                     std::uint64_t seed, Task task, double p_min) {
  if (learners.empty()) throw Error(ErrorKind::config, "stack needs at least one base learner");
  const auto m = static_cast<Eigen::Index>(learners.size());
  VectorXd weights = VectorXd::Zero(m);
  bool uniform = false;

  if (m == 1) {
    weights(0) = 1.0;
  } else {
    const auto n = static_cast<std::size_t>(x.rows());
    const auto assignment = FoldAssignment::make(n, folds, seed);
    MatrixXd oof(x.rows(), m);
    for (int v = 0; v < assignment.folds(); ++v) {
      std::vector<std::size_t> train, test;
      for (std::size_t i = 0; i < n; ++i) (assignment.fold_of(i) == v ? test : train).push_back(i);
      if (assignment.folds() == 1) train = test;
      const MatrixXd xtrain = select_rows(x, train);
      const VectorXd ytrain = select_rows(y, train);
      const MatrixXd xtest = select_rows(x, test);
      for (Eigen::Index l = 0; l < m; ++l) {
        const VectorXd pred = learners[l]->fit(xtrain, ytrain)->predict(xtest);
        for (std::size_t r = 0; r < test.size(); ++r) oof(test[r], l) = pred(static_cast<Eigen::Index>(r));
      }
    }
    const auto solved = nnls(oof, y);
    const double total = solved.weights.sum();
    if (!(total > 0.0)) {
      weights.setConstant(1.0 / static_cast<double>(m));
      uniform = true;
    } else {
      weights = solved.weights / total;
      const double stack_risk = (oof * weights - y).squaredNorm();
      Eigen::Index best = 0;
      double best_risk = (oof.col(0) - y).squaredNorm();
      for (Eigen::Index l = 1; l < m; ++l) {
        const double risk = (oof.col(l) - y).squaredNorm();
        if (risk < best_risk) {
          best_risk = risk;
          best = l;
        }
      }
      if (stack_risk > best_risk) {
        weights.setZero();
        weights(best) = 1.0;
      }
    }
  }

  std::vector<std::unique_ptr<Model>> fitted;
  for (Eigen::Index l = 0; l < m; ++l) {
    // Zero-weight members are not refitted.
    fitted.push_back(weights(l) > 0.0 ? learners[l]->fit(x, y) : nullptr);
  }
  return StackModel(std::move(fitted), std::move(weights), task, p_min, uniform);
}

// ---------------------------------------------------------------------------
// Learner wrappers

namespace {

class OlsLearner final : public Learner {
 public:
  explicit OlsLearner(Expansion e) : expansion_(e) {}
  std::unique_ptr<Model> fit(const MatrixXd& x, const VectorXd& y) const override {
    return std::make_unique<LinearModel>(fit_ols(x, y, expansion_));
  }
  std::string name() const override { return expansion_ == Expansion::quadratic ? "ols_quadratic" : "ols"; }
  Task task() const override { return Task::regression; }

 private:
  Expansion expansion_;
};

class LogisticLearner final : public Learner {
 public:
  LogisticLearner(Expansion e, double p_min) : expansion_(e), p_min_(p_min) {}
  std::unique_ptr<Model> fit(const MatrixXd& x, const VectorXd& y) const override {
    return std::make_unique<LinearModel>(fit_logistic(x, y, expansion_, p_min_));
  }
  std::string name() const override {
    return expansion_ == Expansion::quadratic ? "logistic_quadratic" : "logistic";
  }
  Task task() const override { return Task::classification; }

 private:
  Expansion expansion_;
  double p_min_;
};

class BoostLearner final : public Learner {
 public:
  explicit BoostLearner(BoostConfig c) : config_(c) {}
  std::unique_ptr<Model> fit(const MatrixXd& x, const VectorXd& y) const override {
    return std::make_unique<BoostedTrees>(fit_boosted_stumps(x, y, config_));
  }
  std::string name() const override { return "boosted_trees"; }
  Task task() const override { return config_.task; }

 private:
  BoostConfig config_;
};

class StackLearner final : public Learner {
 public:
  StackLearner(std::vector<LearnerPtr> learners, int folds, std::uint64_t seed, Task task, double p_min)
      : learners_(std::move(learners)), folds_(folds), seed_(seed), task_(task), p_min_(p_min) {}
  std::unique_ptr<Model> fit(const MatrixXd& x, const VectorXd& y) const override {
    return std::make_unique<StackModel>(fit_stack(learners_, x, y, folds_, seed_, task_, p_min_));
  }
  std::string name() const override {
    std::string out = "stack(";
    for (std::size_t l = 0; l < learners_.size(); ++l) out += (l ? "," : "") + learners_[l]->name();
    return out + ")";
  }
  Task task() const override { return task_; }

 private:
  std::vector<LearnerPtr> learners_;
  int folds_;
  std::uint64_t seed_;
  Task task_;
  double p_min_;
};

}  // namespace

LearnerPtr make_ols(Expansion expansion) { return std::make_shared<OlsLearner>(expansion); }
LearnerPtr make_logistic(Expansion expansion, double p_min) {
  return std::make_shared<LogisticLearner>(expansion, p_min);
}
LearnerPtr make_boosted(const BoostConfig& config) { return std::make_shared<BoostLearner>(config); }
LearnerPtr make_stack(std::vector<LearnerPtr> learners, int folds, std::uint64_t seed, Task task, double p_min) {
  return std::make_shared<StackLearner>(std::move(learners), folds, seed, task, p_min);
}

// ---------------------------------------------------------------------------
// Cross-fitting

VectorXd CrossFit::predict(const MatrixXd& x, std::span<const int> individual) const {
  if (static_cast<Eigen::Index>(individual.size()) != x.rows()) {
    throw Error(ErrorKind::validation, "crossfit predict: one individual index per row required");
  }
  VectorXd out(x.rows());
  for (int v = 0; v < folds_.folds(); ++v) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < individual.size(); ++r) {
      if (folds_.fold_of(static_cast<std::size_t>(individual[r])) == v) rows.push_back(r);
    }
    if (rows.empty()) continue;
    const VectorXd pred = models_[v]->predict(select_rows(x, rows));
    for (std::size_t k = 0; k < rows.size(); ++k) out(static_cast<Eigen::Index>(rows[k])) = pred(static_cast<Eigen::Index>(k));
  }
  return out;
}

VectorXd CrossFit::predict(const MatrixXd& x) const {
  std::vector<int> individual(static_cast<std::size_t>(x.rows()));
  std::iota(individual.begin(), individual.end(), 0);
  return predict(x, individual);
}

CrossFit crossfit(const MatrixXd& x, const VectorXd& y, std::span<const int> individual, const Learner& learner,
                  const FoldAssignment& folds) {
  if (static_cast<Eigen::Index>(individual.size()) != x.rows() || y.size() != x.rows()) {
    throw Error(ErrorKind::validation, "crossfit: design, target and individual map must align");
  }
  std::vector<std::unique_ptr<Model>> models;
  for (int v = 0; v < folds.folds(); ++v) {
    std::vector<std::size_t> train;
    for (std::size_t r = 0; r < individual.size(); ++r) {
      if (folds.folds() == 1 || folds.fold_of(static_cast<std::size_t>(individual[r])) != v) train.push_back(r);
    }
    models.push_back(learner.fit(select_rows(x, train), select_rows(y, train)));
  }
  return CrossFit(folds, std::move(models));
}

CrossFit crossfit(const MatrixXd& x, const VectorXd& y, const Learner& learner, const FoldAssignment& folds) {
  std::vector<int> individual(static_cast<std::size_t>(x.rows()));
  std::iota(individual.begin(), individual.end(), 0);
  return crossfit(x, y, individual, learner, folds);
}

}  // namespace lmtp
