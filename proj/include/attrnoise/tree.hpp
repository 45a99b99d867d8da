#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

#include "attrnoise/tabular.hpp"

namespace attrnoise {

struct TreeParams {
  std::size_t max_depth = 8;
  std::size_t min_leaf = 5;
  std::uint64_t seed = 0;  // recorded; splits are deterministic (lowest column, then threshold)
};

/// Binary CART tree. Classification leaves hold a class-probability vector
/// (Gini splits); regression leaves hold the mean target (squared-error
/// splits). A row goes left when x[column] <= threshold.
class CartTree {
 public:
  enum class Task { classification, regression };

  struct Node {
    int column = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> value;  // class probabilities or {mean}
  };

  static CartTree fit_classifier(const Eigen::MatrixXd& x, const std::vector<int>& classes,
                                 std::size_t n_classes, const TreeParams& params);
  static CartTree fit_regressor(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TreeParams& params);

  const std::vector<double>& leaf_value(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  /// Probability of class 1 (binary classifiers).
  double predict_proba(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  Eigen::VectorXd predict_proba_rows(const Eigen::MatrixXd& x) const;
  /// Most probable class, lowest index on ties.
  int predict_class(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  double predict_value(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;

  std::size_t depth() const;
  std::size_t n_leaves() const;
  const std::vector<Node>& nodes() const { return nodes_; }
  Task task() const { return task_; }
  const TreeParams& params() const { return params_; }

 private:
  Task task_ = Task::classification;
  TreeParams params_;
  std::vector<Node> nodes_;

  friend class TreeBuilder;
};

/// Binary classification tree; requires both classes and a complete matrix.
CartTree fit_tree(const Eigen::MatrixXd& x, const Labels& labels, const TreeParams& params = {});

}  // namespace attrnoise
