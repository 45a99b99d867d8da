#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "attrnoise/tabular.hpp"
#include "attrnoise/tree.hpp"

namespace attrnoise {

class CorrectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PandaParams {
  int bins = 4;
};

struct NoiseRanking {
  std::vector<double> scores;        // per row, >= 0
  std::vector<std::size_t> ranking;  // rows by descending score, ties by row index
};

/// Pairwise attribute deviation ranking. For every ordered column pair
/// (j, k), rows are binned by quantiles of column j; a row's deviation on k is
/// |x_ik - bin mean of k| / bin std of k (0 for a constant bin). A row's
/// score is the sum over all pairs.
NoiseRanking panda_scores(const Eigen::MatrixXd& x, const PandaParams& params = {});

struct FilterParams {
  int n_folds = 5;
  /// One cross-validation per seed; a row is flagged by majority vote.
  std::vector<std::uint64_t> seeds{0, 1, 2};
  TreeParams tree{};
};

/// Rows misclassified by cross-validated trees in a majority of seeds.
std::vector<std::size_t> sfil_flags(const Eigen::MatrixXd& x, const Labels& labels, const FilterParams& params = {});
/// The floor(fraction * n) highest-ranked rows.
std::vector<std::size_t> pfil_flags(const Eigen::MatrixXd& x, double fraction, const PandaParams& params = {});

/// Rows kept after removing the flagged ones (ascending row order).
std::vector<std::size_t> sfil(const Eigen::MatrixXd& x, const Labels& labels, const FilterParams& params = {});
std::vector<std::size_t> pfil(const Eigen::MatrixXd& x, const Labels& labels, double fraction,
                              const PandaParams& params = {});

struct PolishParams {
  TreeParams tree{5, 5, 0};
  std::size_t min_clean_rows = 20;
  /// Keep a polished row only if a tree trained on the clean rows then
  /// classifies it correctly.
  bool require_fix = false;
};

/// Replaces every attribute of each flagged row with the prediction of a
/// tree trained on the unflagged rows (regression for continuous columns,
/// classification over the one-hot group for categorical ones; inputs are
/// all other columns plus the label). Unflagged rows are untouched.
Eigen::MatrixXd polish(const Eigen::MatrixXd& x, const std::vector<FeatureSpec>& specs, const Labels& labels,
                       const std::vector<std::size_t>& flagged, const PolishParams& params = {});

Eigen::MatrixXd spol(const Eigen::MatrixXd& x, const std::vector<FeatureSpec>& specs, const Labels& labels,
                     const FilterParams& filter = {}, const PolishParams& params = {});
Eigen::MatrixXd ppol(const Eigen::MatrixXd& x, const std::vector<FeatureSpec>& specs, const Labels& labels,
                     double fraction, const PandaParams& panda = {}, const PolishParams& params = {});

/// rank,row,score
void write_ranking_csv(const NoiseRanking& ranking, std::ostream& out);

}  // namespace attrnoise
