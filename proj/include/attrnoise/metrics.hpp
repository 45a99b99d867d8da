#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "attrnoise/tabular.hpp"
#include "attrnoise/tree.hpp"

namespace attrnoise {

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean of per-class recalls over the classes present in `truth`.
double balanced_accuracy(std::span<const int> truth, std::span<const int> predicted);

/// Area under the ROC curve, trapezoidal over all score thresholds (tied
/// scores count one half, as in the Mann-Whitney statistic).
double roc_auc(std::span<const int> truth, std::span<const double> scores);

/// Stratified fold assignment: fold id per row. Each class is shuffled with
/// `seed` and dealt round-robin, so every fold holds floor or ceil of its
/// class share.
std::vector<int> stratified_folds(std::span<const int> labels, int n_folds, std::uint64_t seed);

struct CvParams {
  int n_folds = 5;
  std::vector<std::uint64_t> seeds{0};
  TreeParams tree;
  /// Predicted class is 1 when the leaf probability reaches this value.
  double decision_threshold = 0.5;
};

struct FoldScore {
  std::uint64_t seed = 0;
  int fold = 0;
  double balanced_accuracy = 0.0;
  double auc = 0.0;
};

struct EvalReport {
  double balanced_accuracy = 0.0;
  double auc = 0.0;
  std::vector<FoldScore> folds;
  int n_folds = 0;
};

/// Stratified k-fold decision-tree evaluation, repeated for each seed;
/// aggregates are means over all folds of all seeds.
EvalReport cv_evaluate(const Eigen::MatrixXd& x, std::span<const int> labels, const CvParams& params = {});

/// Two-sided Welch t-test p-value. Two constant samples give p = 1 when
/// equal and p = 0 otherwise.
double welch_ttest(std::span<const double> a, std::span<const double> b);

/// Student t cumulative distribution with (possibly fractional) dof.
double student_t_cdf(double t, double dof);
/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

enum class Mark { better, even, worse };
const char* mark_symbol(Mark m);  // "•", "≡", "◦"
const char* to_string(Mark m);

struct SignificanceMark {
  Mark mark = Mark::even;
  double p_value = 1.0;
  double mean_ours = 0.0;
  double mean_theirs = 0.0;
};

/// Marks `ours` against `theirs`: even when p >= alpha, else better or worse
/// by the sign of the mean difference. Samples must have equal sizes.
SignificanceMark mark_significance(std::span<const double> ours, std::span<const double> theirs,
                                   double alpha = 0.05);

}  // namespace attrnoise
