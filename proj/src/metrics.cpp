#include "attrnoise/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace attrnoise {

double balanced_accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw EvaluationError("balanced_accuracy: size mismatch");
  double hits[2] = {0, 0};
  double counts[2] = {0, 0};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int y = truth[i];
    if (y != 0 && y != 1) throw EvaluationError("balanced_accuracy: labels must be 0/1");
    counts[y] += 1.0;
    if (predicted[i] == y) hits[y] += 1.0;
  }
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < 2; ++c) {
    if (counts[c] == 0) continue;
    sum += hits[c] / counts[c];
    ++present;
  }
  if (present == 0) throw EvaluationError("balanced_accuracy: empty input");
  return sum / present;
}

double roc_auc(std::span<const int> truth, std::span<const double> scores) {
  if (truth.size() != scores.size()) throw EvaluationError("roc_auc: size mismatch");
  const std::size_t n = truth.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos = 0, neg = 0, pos_rank_sum = 0;
  for (std::size_t k = 0; k < n;) {
    std::size_t e = k;
    while (e < n && scores[order[e]] == scores[order[k]]) ++e;
    const double mid_rank = (static_cast<double>(k + 1) + static_cast<double>(e)) / 2.0;
    for (std::size_t t = k; t < e; ++t) {
      if (truth[order[t]] == 1) {
        pos += 1;
        pos_rank_sum += mid_rank;
      } else {
        neg += 1;
      }
    }
    k = e;
  }
  if (pos == 0 || neg == 0) throw EvaluationError("roc_auc: both classes must be present");
  return (pos_rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

std::vector<int> stratified_folds(std::span<const int> labels, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw EvaluationError("stratified_folds: need at least 2 folds");
  std::mt19937_64 rng(seed);
  std::vector<int> fold(labels.size(), 0);
  int next = 0;
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    for (auto i : members) {
      fold[i] = next;
      next = (next + 1) % n_folds;
    }
  }
  return fold;
}

EvalReport cv_evaluate(const Eigen::MatrixXd& x, std::span<const int> labels, const CvParams& params) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw EvaluationError("cv_evaluate: size mismatch");
  if (params.seeds.empty()) throw EvaluationError("cv_evaluate: no seeds");
  const auto ones = std::count(labels.begin(), labels.end(), 1);
  const auto zeros = std::count(labels.begin(), labels.end(), 0);
  if (ones + zeros != static_cast<long>(labels.size())) throw EvaluationError("cv_evaluate: labels must be 0/1");
  if (std::min(ones, zeros) < params.n_folds)
    throw EvaluationError("cv_evaluate: each class needs at least " + std::to_string(params.n_folds) +
                          " rows (have " + std::to_string(zeros) + "/" + std::to_string(ones) + ")");

  EvalReport report;
  report.n_folds = params.n_folds;
  for (auto seed : params.seeds) {
    const auto folds = stratified_folds(labels, params.n_folds, seed);
    for (int f = 0; f < params.n_folds; ++f) {
      std::vector<Eigen::Index> train, test;
      for (std::size_t i = 0; i < labels.size(); ++i)
        (folds[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
      Eigen::MatrixXd xtr = x(train, Eigen::placeholders::all);
      Labels ytr, yte;
      for (auto i : train) ytr.push_back(labels[static_cast<std::size_t>(i)]);
      for (auto i : test) yte.push_back(labels[static_cast<std::size_t>(i)]);

      TreeParams tp = params.tree;
      tp.seed = seed;
      const CartTree tree = fit_tree(xtr, ytr, tp);
      std::vector<double> score;
      std::vector<int> pred;
      for (auto i : test) {
        const double p = tree.predict_proba(x.row(i));
        score.push_back(p);
        pred.push_back(p >= params.decision_threshold ? 1 : 0);
      }
      report.folds.push_back({seed, f, balanced_accuracy(yte, pred), roc_auc(yte, score)});
    }
  }
  for (const auto& fs : report.folds) {
    report.balanced_accuracy += fs.balanced_accuracy;
    report.auc += fs.auc;
  }
  report.balanced_accuracy /= static_cast<double>(report.folds.size());
  report.auc /= static_cast<double>(report.folds.size());
  return report;
}

}  // namespace attrnoise
