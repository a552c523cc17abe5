#ifndef CLIMAX_BLACKBOX_HPP
#define CLIMAX_BLACKBOX_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "climax/common.hpp"
#include "climax/errors.hpp"

namespace climax {

/// Throws ModelUnavailable unless every row of `probs` is a point of the
/// probability simplex (entries in [0,1], row sum within `tol` of 1).
inline void validate_simplex(const Matrix& probs, double tol = 1e-9) {
  for (Index i = 0; i < probs.rows(); ++i) {
    double sum = 0.0;
    for (Index c = 0; c < probs.cols(); ++c) {
      const double p = probs(i, c);
      if (!(p >= 0.0 && p <= 1.0))
        throw ModelUnavailable("probability outside [0,1] in row " + std::to_string(i));
      sum += p;
    }
    if (std::abs(sum - 1.0) > tol)
      throw ModelUnavailable("row " + std::to_string(i) + " sums to " + format_double(sum));
  }
}

/// Query-only access to a classifier: a batch of instances in, one row of
/// class probabilities per instance out.
class ProbabilityModel {
 public:
  virtual ~ProbabilityModel() = default;

  virtual int num_classes() const = 0;
  /// Expected column count of a batch, or -1 when the model cannot tell.
  virtual Index num_features() const { return -1; }

  Matrix predict_proba(const Matrix& batch) const {
    const Index d = num_features();
    if (d >= 0 && batch.cols() != d)
      throw DimensionError("batch has " + std::to_string(batch.cols()) +
                           " columns, model expects " + std::to_string(d));
    if (batch.rows() == 0) return Matrix(0, num_classes());
    Matrix probs = predict_batch(batch);
    if (probs.rows() != batch.rows() || probs.cols() != num_classes())
      throw ModelUnavailable("model returned a " + std::to_string(probs.rows()) + "x" +
                             std::to_string(probs.cols()) + " probability matrix");
    validate_simplex(probs);
    return probs;
  }

 protected:
  virtual Matrix predict_batch(const Matrix& batch) const = 0;
};

/// Wraps a plain function as a model. Handy for synthetic black boxes.
class FunctionModel : public ProbabilityModel {
 public:
  using Fn = std::function<Matrix(const Matrix&)>;

  FunctionModel(int num_classes, Index num_features, Fn fn)
      : classes_(num_classes), features_(num_features), fn_(std::move(fn)) {}

  int num_classes() const override { return classes_; }
  Index num_features() const override { return features_; }

 protected:
  Matrix predict_batch(const Matrix& batch) const override { return fn_(batch); }

 private:
  int classes_;
  Index features_;
  Fn fn_;
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = 8;
  int max_features = 0;  // 0 selects ceil(sqrt(d))
  double leaf_smoothing = 1.0;  // additive (Laplace) pseudo-count per class
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  std::vector<double> class_counts;  // leaves only
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    const TreeNode* node = &nodes[0];
    while (node->feature >= 0)
      node = &nodes[static_cast<std::size_t>(x(node->feature) <= node->threshold ? node->left
                                                                                : node->right)];
    return *node;
  }

  int depth() const {
    std::vector<std::pair<int, int>> stack{{0, 0}};
    int best = 0;
    while (!stack.empty()) {
      auto [id, dep] = stack.back();
      stack.pop_back();
      const TreeNode& n = nodes[static_cast<std::size_t>(id)];
      best = std::max(best, dep);
      if (n.feature >= 0) {
        stack.emplace_back(n.left, dep + 1);
        stack.emplace_back(n.right, dep + 1);
      }
    }
    return best;
  }

  bool operator==(const DecisionTree& o) const {
    if (nodes.size() != o.nodes.size()) return false;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const TreeNode& a = nodes[i];
      const TreeNode& b = o.nodes[i];
      if (a.feature != b.feature || a.threshold != b.threshold || a.left != b.left ||
          a.right != b.right || a.class_counts != b.class_counts)
        return false;
    }
    return true;
  }
};

/// Bagged Gini forest. Immutable after training; concurrent queries are safe.
class ForestModel : public ProbabilityModel {
 public:
  ForestModel(std::vector<DecisionTree> trees, int num_classes, Index num_features,
              ForestParams params, std::uint64_t seed)
      : trees_(std::move(trees)),
        classes_(num_classes),
        features_(num_features),
        params_(params),
        seed_(seed) {}

  int num_classes() const override { return classes_; }
  Index num_features() const override { return features_; }

  const std::vector<DecisionTree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }
  std::uint64_t seed() const { return seed_; }

 protected:
  Matrix predict_batch(const Matrix& batch) const override {
    Matrix out = Matrix::Zero(batch.rows(), classes_);
    const double smooth = params_.leaf_smoothing;
    for (Index i = 0; i < batch.rows(); ++i) {
      for (const DecisionTree& tree : trees_) {
        const TreeNode& leaf = tree.leaf_for(batch.row(i));
        double total = smooth * classes_;
        for (double c : leaf.class_counts) total += c;
        for (int c = 0; c < classes_; ++c)
          out(i, c) += (leaf.class_counts[static_cast<std::size_t>(c)] + smooth) / total;
      }
    }
    out /= static_cast<double>(trees_.size());
    // Renormalize so accumulated round-off cannot leave the simplex.
    for (Index i = 0; i < out.rows(); ++i) out.row(i) /= out.row(i).sum();
    return out;
  }

 private:
  std::vector<DecisionTree> trees_;
  int classes_;
  Index features_;
  ForestParams params_;
  std::uint64_t seed_;
};

namespace detail {

inline double gini(const std::vector<double>& counts, double total) {
  if (total <= 0) return 0.0;
  double s = 0.0;
  for (double c : counts) s += (c / total) * (c / total);
  return 1.0 - s;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<int>& y, int num_classes, int max_depth,
              int max_features, Rng& rng)
      : x_(x), y_(y), classes_(num_classes), max_depth_(max_depth),
        max_features_(max_features), rng_(rng) {}

  DecisionTree build(std::vector<Index> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  std::vector<double> counts_of(const std::vector<Index>& rows) const {
    std::vector<double> counts(static_cast<std::size_t>(classes_), 0.0);
    for (Index r : rows) counts[static_cast<std::size_t>(y_[static_cast<std::size_t>(r)])] += 1.0;
    return counts;
  }

  int make_leaf(std::vector<double> counts) {
    TreeNode leaf;
    leaf.class_counts = std::move(counts);
    tree_.nodes.push_back(std::move(leaf));
    return static_cast<int>(tree_.nodes.size() - 1);
  }

  int grow(std::vector<Index> rows, int depth) {
    std::vector<double> counts = counts_of(rows);
    const double n = static_cast<double>(rows.size());
    const double parent = gini(counts, n);
    if (depth >= max_depth_ || rows.size() < 2 || parent <= 0.0) return make_leaf(std::move(counts));

    const Index d = x_.cols();
    std::vector<Index> features(static_cast<std::size_t>(d));
    std::iota(features.begin(), features.end(), Index{0});
    const int mtry = static_cast<int>(std::min<Index>(max_features_, d));
    for (int k = 0; k < mtry; ++k) {
      std::uniform_int_distribution<Index> pick(k, d - 1);
      std::swap(features[static_cast<std::size_t>(k)], features[static_cast<std::size_t>(pick(rng_))]);
    }

    double best_gain = 0.0;
    Index best_feature = -1;
    double best_threshold = 0.0;
    std::vector<Index> sorted = rows;
    for (int k = 0; k < mtry; ++k) {
      const Index f = features[static_cast<std::size_t>(k)];
      std::sort(sorted.begin(), sorted.end(), [&](Index a, Index b) {
        return x_(a, f) < x_(b, f) || (x_(a, f) == x_(b, f) && a < b);
      });
      std::vector<double> left(static_cast<std::size_t>(classes_), 0.0);
      std::vector<double> right = counts;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const auto label = static_cast<std::size_t>(y_[static_cast<std::size_t>(sorted[i])]);
        left[label] += 1.0;
        right[label] -= 1.0;
        const double lo = x_(sorted[i], f);
        const double hi = x_(sorted[i + 1], f);
        if (!(lo < hi)) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        const double gain = parent - (nl / n) * gini(left, nl) - (nr / n) * gini(right, nr);
        if (gain > best_gain + 1e-15) {
          best_gain = gain;
          best_feature = f;
          best_threshold = lo + (hi - lo) / 2.0;
          if (!(best_threshold < hi)) best_threshold = lo;
        }
      }
    }
    if (best_feature < 0) return make_leaf(std::move(counts));

    std::vector<Index> left_rows, right_rows;
    for (Index r : rows)
      (x_(r, best_feature) <= best_threshold ? left_rows : right_rows).push_back(r);

    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[static_cast<std::size_t>(id)].feature = static_cast<int>(best_feature);
    tree_.nodes[static_cast<std::size_t>(id)].threshold = best_threshold;
    const int l = grow(std::move(left_rows), depth + 1);
    const int r = grow(std::move(right_rows), depth + 1);
    tree_.nodes[static_cast<std::size_t>(id)].left = l;
    tree_.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  const Matrix& x_;
  const std::vector<int>& y_;
  int classes_;
  int max_depth_;
  int max_features_;
  Rng& rng_;
  DecisionTree tree_;
};

}  // namespace detail

/// Fits a random forest: one bootstrap resample of size n per tree, Gini
/// splits over a random subset of features at every node.
inline ForestModel train_forest(const Matrix& data, const std::vector<int>& labels,
                                ForestParams params = {}, std::uint64_t seed = 0) {
  const Index n = data.rows();
  const Index d = data.cols();
  if (n < 2) throw InvalidTrainingData("need at least two rows");
  if (static_cast<Index>(labels.size()) != n)
    throw InvalidTrainingData("label count does not match row count");
  if (params.n_trees < 1 || params.max_depth < 1)
    throw InvalidTrainingData("n_trees and max_depth must be >= 1");
  if (!data.allFinite()) throw InvalidTrainingData("non-finite feature value");
  if (*std::min_element(labels.begin(), labels.end()) < 0)
    throw InvalidTrainingData("negative class label");
  const int classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<int> seen = class_counts(labels, classes);
  if (std::count_if(seen.begin(), seen.end(), [](int c) { return c > 0; }) < 2)
    throw InvalidTrainingData("labels contain a single class");

  int mtry = params.max_features;
  if (mtry <= 0) mtry = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));

  std::vector<DecisionTree> trees;
  trees.reserve(static_cast<std::size_t>(params.n_trees));
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::uniform_int_distribution<Index> draw(0, n - 1);
    std::vector<Index> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = draw(rng);
    detail::TreeBuilder builder(data, labels, classes, params.max_depth, mtry, rng);
    trees.push_back(builder.build(std::move(rows)));
  }
  return ForestModel(std::move(trees), classes, d, params, seed);
}

/// Area under the ROC curve of `scores` for the positive labels (ties count
/// one half, Mann-Whitney form).
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& positive) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  double pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (positive[order[k]]) {
        rank_sum += avg_rank;
        pos += 1.0;
      }
    i = j + 1;
  }
  const double neg = static_cast<double>(scores.size()) - pos;
  if (pos == 0 || neg == 0) return std::nan("");
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

}  // namespace climax

#endif  // CLIMAX_BLACKBOX_HPP
