#include "attrnoise/tree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace attrnoise {

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, CartTree& tree) : x_(x), tree_(tree) {}

  std::vector<int> classes;
  std::size_t n_classes = 0;
  Eigen::VectorXd target;

  int build(std::vector<Eigen::Index>& rows, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes_.size());
    tree_.nodes_.emplace_back();
    tree_.nodes_[static_cast<std::size_t>(id)].value = leaf_value(rows);

    const auto& p = tree_.params_;
    if (depth >= p.max_depth || rows.size() < 2 * p.min_leaf || pure(rows)) return id;

    const Split split = best_split(rows);
    if (split.column < 0) return id;

    std::vector<Eigen::Index> left, right;
    for (auto r : rows) (x_(r, split.column) <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    auto& node = tree_.nodes_[static_cast<std::size_t>(id)];
    node.column = split.column;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

 private:
  struct Split {
    int column = -1;
    double threshold = 0.0;
    double gain = -1.0;
  };

  bool classifying() const { return tree_.task_ == CartTree::Task::classification; }

  std::vector<double> leaf_value(const std::vector<Eigen::Index>& rows) const {
    if (classifying()) {
      std::vector<double> probs(n_classes, 0.0);
      for (auto r : rows) probs[static_cast<std::size_t>(classes[static_cast<std::size_t>(r)])] += 1.0;
      for (auto& v : probs) v /= static_cast<double>(rows.size());
      return probs;
    }
    double sum = 0.0;
    for (auto r : rows) sum += target(r);
    return {sum / static_cast<double>(rows.size())};
  }

  bool pure(const std::vector<Eigen::Index>& rows) const {
    if (classifying()) {
      const int c0 = classes[static_cast<std::size_t>(rows.front())];
      return std::all_of(rows.begin(), rows.end(),
                         [&](Eigen::Index r) { return classes[static_cast<std::size_t>(r)] == c0; });
    }
    const double y0 = target(rows.front());
    return std::all_of(rows.begin(), rows.end(), [&](Eigen::Index r) { return target(r) == y0; });
  }

  // Classification score: sum over children of sum_c count_c^2 / n_child
  // (maximizing it minimizes weighted Gini). Regression score: sum over
  // children of sum_y^2 / n_child (maximizing it minimizes squared error).
  Split best_split(const std::vector<Eigen::Index>& rows) const {
    const std::size_t n = rows.size();
    const std::size_t min_leaf = std::max<std::size_t>(tree_.params_.min_leaf, 1);
    std::vector<std::pair<double, Eigen::Index>> order(n);

    double parent_score = 0.0;
    std::vector<double> total(classifying() ? n_classes : 1, 0.0);
    double total_sq = 0.0;
    if (classifying()) {
      for (auto r : rows) total[static_cast<std::size_t>(classes[static_cast<std::size_t>(r)])] += 1.0;
      for (double c : total) parent_score += c * c;
      parent_score /= static_cast<double>(n);
    } else {
      for (auto r : rows) {
        total[0] += target(r);
        total_sq += target(r) * target(r);
      }
      parent_score = total[0] * total[0] / static_cast<double>(n);
    }
    // Classification allows zero-gain splits on impure nodes (needed for
    // XOR-like layouts); regression requires a real decrease.
    const double min_gain = classifying() ? -1e-9 : 1e-12 * std::max(1.0, total_sq);

    Split best;
    std::vector<double> left(total.size());
    for (Eigen::Index col = 0; col < x_.cols(); ++col) {
      for (std::size_t k = 0; k < n; ++k) order[k] = {x_(rows[k], col), rows[k]};
      std::sort(order.begin(), order.end());
      if (order.front().first == order.back().first) continue;
      std::fill(left.begin(), left.end(), 0.0);
      double left_sq_sum = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const auto r = order[k].second;
        if (classifying()) {
          const auto c = static_cast<std::size_t>(classes[static_cast<std::size_t>(r)]);
          left_sq_sum += 2.0 * left[c] + 1.0;  // (l+1)^2 - l^2
          left[c] += 1.0;
        } else {
          left[0] += target(r);
        }
        const std::size_t nl = k + 1;
        const std::size_t nr = n - nl;
        if (order[k].first == order[k + 1].first || nl < min_leaf) continue;
        if (nr < min_leaf) break;
        double score = 0.0;
        if (classifying()) {
          double right_sq = 0.0;
          for (std::size_t c = 0; c < total.size(); ++c) {
            const double rc = total[c] - left[c];
            right_sq += rc * rc;
          }
          score = left_sq_sum / double(nl) + right_sq / double(nr);
        } else {
          const double rs = total[0] - left[0];
          score = left[0] * left[0] / double(nl) + rs * rs / double(nr);
        }
        const double gain = score - parent_score;
        if (gain > min_gain && gain > best.gain + 1e-12) {
          const double lo = order[k].first;
          const double hi = order[k + 1].first;
          double thr = lo + (hi - lo) / 2.0;
          if (!(thr < hi)) thr = lo;
          best = {static_cast<int>(col), thr, gain};
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  CartTree& tree_;
};

namespace {

void check_matrix(const Eigen::MatrixXd& x, std::size_t n) {
  if (static_cast<std::size_t>(x.rows()) != n) throw std::invalid_argument("tree: target size does not match rows");
  if (x.rows() == 0) throw std::invalid_argument("tree: empty training set");
  if (!x.allFinite()) throw std::invalid_argument("tree: training matrix has missing or non-finite cells");
}

}  // namespace

CartTree CartTree::fit_classifier(const Eigen::MatrixXd& x, const std::vector<int>& classes,
                                  std::size_t n_classes, const TreeParams& params) {
  check_matrix(x, classes.size());
  for (int c : classes)
    if (c < 0 || static_cast<std::size_t>(c) >= n_classes) throw std::invalid_argument("tree: class id out of range");
  CartTree tree;
  tree.task_ = Task::classification;
  tree.params_ = params;
  TreeBuilder builder(x, tree);
  builder.classes = classes;
  builder.n_classes = n_classes;
  std::vector<Eigen::Index> rows(classes.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<Eigen::Index>(i);
  builder.build(rows, 0);
  return tree;
}

CartTree CartTree::fit_regressor(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TreeParams& params) {
  check_matrix(x, static_cast<std::size_t>(y.size()));
  CartTree tree;
  tree.task_ = Task::regression;
  tree.params_ = params;
  TreeBuilder builder(x, tree);
  builder.target = y;
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(y.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<Eigen::Index>(i);
  builder.build(rows, 0);
  return tree;
}

const std::vector<double>& CartTree::leaf_value(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  std::size_t id = 0;
  while (nodes_[id].column >= 0) {
    const auto& n = nodes_[id];
    id = static_cast<std::size_t>(row(n.column) <= n.threshold ? n.left : n.right);
  }
  return nodes_[id].value;
}

double CartTree::predict_proba(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  const auto& v = leaf_value(row);
  return v.size() > 1 ? v[1] : 0.0;
}

Eigen::VectorXd CartTree::predict_proba_rows(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd p(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) p(i) = predict_proba(x.row(i));
  return p;
}

int CartTree::predict_class(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  const auto& v = leaf_value(row);
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

double CartTree::predict_value(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  return leaf_value(row).front();
}

std::size_t CartTree::depth() const {
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t deepest = 0;
  // Children are always created after their parent.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes_[i].column >= 0) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

std::size_t CartTree::n_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.column < 0; }));
}

CartTree fit_tree(const Eigen::MatrixXd& x, const Labels& labels, const TreeParams& params) {
  const auto ones = std::count(labels.begin(), labels.end(), 1);
  if (ones == 0 || ones == static_cast<long>(labels.size()))
    throw std::invalid_argument("fit_tree: labels must contain both classes");
  return CartTree::fit_classifier(x, labels, 2, params);
}

}  // namespace attrnoise
