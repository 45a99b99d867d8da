#include "attrnoise/polish.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "attrnoise/metrics.hpp"

namespace attrnoise {

namespace {

void check_labels(const Eigen::MatrixXd& x, const Labels& labels) {
  if (labels.size() != static_cast<std::size_t>(x.rows())) throw CorrectionError("label count does not match rows");
  const auto ones = std::count(labels.begin(), labels.end(), 1);
  if (ones == 0 || ones == static_cast<long>(labels.size())) throw CorrectionError("both classes must be present");
}

void check_fraction(double fraction) {
  if (!(fraction > 0.0 && fraction < 0.5)) throw CorrectionError("noisy fraction must lie in (0, 0.5)");
}

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& flagged) {
  std::vector<char> drop(n, 0);
  for (auto r : flagged) drop[r] = 1;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i)
    if (!drop[i]) kept.push_back(i);
  return kept;
}

std::vector<std::size_t> keep_checked(const Labels& labels, const std::vector<std::size_t>& flagged) {
  auto kept = complement(labels.size(), flagged);
  bool has[2] = {false, false};
  for (auto r : kept) has[labels[r]] = true;
  if (!has[0] || !has[1]) throw CorrectionError("filtering would empty a class");
  return kept;
}

}  // namespace

NoiseRanking panda_scores(const Eigen::MatrixXd& x, const PandaParams& params) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (d < 2) throw CorrectionError("panda: need at least 2 attributes");
  if (params.bins < 1) throw CorrectionError("panda: bins must be >= 1");
  if (!x.allFinite()) throw CorrectionError("panda: matrix must be complete");

  Eigen::VectorXd score = Eigen::VectorXd::Zero(n);
  std::vector<double> sorted(static_cast<std::size_t>(n));
  std::vector<int> bin(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) sorted[static_cast<std::size_t>(i)] = x(i, j);
    std::sort(sorted.begin(), sorted.end());
    // Empirical-CDF quantiles: smallest value v with F(v) >= b / bins.
    std::vector<double> cuts;
    for (int b = 1; b < params.bins; ++b) {
      const auto pos = static_cast<std::size_t>(std::ceil(double(b) * double(n) / params.bins));
      cuts.push_back(sorted[std::max<std::size_t>(pos, 1) - 1]);
    }
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(params.bins));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto b = std::lower_bound(cuts.begin(), cuts.end(), x(i, j)) - cuts.begin();
      members[static_cast<std::size_t>(b)].push_back(i);
    }
    for (const auto& rows : members) {
      if (rows.empty()) continue;
      const Eigen::MatrixXd sub = x(rows, Eigen::placeholders::all);
      const Eigen::RowVectorXd mean = sub.colwise().mean();
      const Eigen::MatrixXd centered = sub.rowwise() - mean;
      const Eigen::RowVectorXd sd = (centered.array().square().colwise().sum() / double(rows.size())).sqrt().matrix();
      for (Eigen::Index k = 0; k < d; ++k) {
        if (k == j || !(sd(k) > 1e-12)) continue;
        for (std::size_t t = 0; t < rows.size(); ++t)
          score(rows[t]) += std::fabs(centered(static_cast<Eigen::Index>(t), k)) / sd(k);
      }
    }
  }

  NoiseRanking out;
  out.scores.assign(score.data(), score.data() + n);
  out.ranking.resize(static_cast<std::size_t>(n));
  std::iota(out.ranking.begin(), out.ranking.end(), 0);
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return out.scores[a] > out.scores[b]; });
  return out;
}

std::vector<std::size_t> sfil_flags(const Eigen::MatrixXd& x, const Labels& labels, const FilterParams& params) {
  check_labels(x, labels);
  if (params.seeds.empty()) throw CorrectionError("sfil: no seeds");
  const auto n = labels.size();
  std::vector<int> votes(n, 0);
  for (auto seed : params.seeds) {
    const auto folds = stratified_folds(labels, params.n_folds, seed);
    for (int f = 0; f < params.n_folds; ++f) {
      std::vector<Eigen::Index> train;
      Labels ytr;
      for (std::size_t i = 0; i < n; ++i)
        if (folds[i] != f) {
          train.push_back(static_cast<Eigen::Index>(i));
          ytr.push_back(labels[i]);
        }
      TreeParams tp = params.tree;
      tp.seed = seed;
      const CartTree tree = fit_tree(x(train, Eigen::placeholders::all), ytr, tp);
      for (std::size_t i = 0; i < n; ++i)
        if (folds[i] == f && tree.predict_class(x.row(static_cast<Eigen::Index>(i))) != labels[i]) ++votes[i];
    }
  }
  std::vector<std::size_t> flagged;
  for (std::size_t i = 0; i < n; ++i)
    if (2 * votes[i] > static_cast<int>(params.seeds.size())) flagged.push_back(i);
  return flagged;
}

std::vector<std::size_t> pfil_flags(const Eigen::MatrixXd& x, double fraction, const PandaParams& params) {
  check_fraction(fraction);
  const auto ranking = panda_scores(x, params).ranking;
  const auto count = static_cast<std::size_t>(std::floor(fraction * double(x.rows())));
  std::vector<std::size_t> flagged(ranking.begin(), ranking.begin() + static_cast<long>(count));
  std::sort(flagged.begin(), flagged.end());
  return flagged;
}

std::vector<std::size_t> sfil(const Eigen::MatrixXd& x, const Labels& labels, const FilterParams& params) {
  return keep_checked(labels, sfil_flags(x, labels, params));
}

std::vector<std::size_t> pfil(const Eigen::MatrixXd& x, const Labels& labels, double fraction,
                              const PandaParams& params) {
  check_labels(x, labels);
  return keep_checked(labels, pfil_flags(x, fraction, params));
}

Eigen::MatrixXd polish(const Eigen::MatrixXd& x, const std::vector<FeatureSpec>& specs, const Labels& labels,
                       const std::vector<std::size_t>& flagged, const PolishParams& params) {
  check_labels(x, labels);
  if (static_cast<std::size_t>(x.cols()) != encoded_width(specs)) throw CorrectionError("polish: width does not match specs");
  if (flagged.empty()) return x;

  const auto clean = complement(labels.size(), flagged);
  if (clean.size() < params.min_clean_rows)
    throw CorrectionError("polish: clean set too small (" + std::to_string(clean.size()) + " rows)");

  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  // Attributes plus the label as the last input column.
  Eigen::MatrixXd with_label(n, d + 1);
  with_label.leftCols(d) = x;
  for (Eigen::Index i = 0; i < n; ++i) with_label(i, d) = labels[static_cast<std::size_t>(i)];

  std::vector<Eigen::Index> clean_rows(clean.begin(), clean.end());
  Eigen::MatrixXd out = x;
  for (const auto& g : column_groups(specs)) {
    const auto first = static_cast<Eigen::Index>(g.first);
    const auto width = static_cast<Eigen::Index>(g.width);
    std::vector<Eigen::Index> inputs;
    for (Eigen::Index c = 0; c <= d; ++c)
      if (c < first || c >= first + width) inputs.push_back(c);
    const Eigen::MatrixXd features = with_label(Eigen::placeholders::all, inputs);
    const Eigen::MatrixXd train = features(clean_rows, Eigen::placeholders::all);

    if (!specs[g.feature].is_categorical()) {
      const Eigen::VectorXd y = x(clean_rows, first);
      const auto tree = CartTree::fit_regressor(train, y, params.tree);
      for (auto r : flagged) {
        const auto i = static_cast<Eigen::Index>(r);
        const double v = tree.predict_value(features.row(i));
        if (v != out(i, first)) out(i, first) = v;
      }
    } else {
      std::vector<int> cls;
      for (auto r : clean_rows) {
        Eigen::Index best = 0;
        x.row(r).segment(first, width).maxCoeff(&best);
        cls.push_back(static_cast<int>(best));
      }
      const auto tree = CartTree::fit_classifier(train, cls, g.width, params.tree);
      for (auto r : flagged) {
        const auto i = static_cast<Eigen::Index>(r);
        Eigen::RowVectorXd onehot = Eigen::RowVectorXd::Zero(width);
        onehot(tree.predict_class(features.row(i))) = 1.0;
        if (onehot != out.row(i).segment(first, width)) out.row(i).segment(first, width) = onehot;
      }
    }
  }

  if (params.require_fix) {
    Labels yclean;
    for (auto r : clean) yclean.push_back(labels[r]);
    const auto judge = fit_tree(x(clean_rows, Eigen::placeholders::all), yclean, params.tree);
    for (auto r : flagged) {
      const auto i = static_cast<Eigen::Index>(r);
      if (judge.predict_class(out.row(i)) != labels[r]) out.row(i) = x.row(i);
    }
  }
  return out;
}

Eigen::MatrixXd spol(const Eigen::MatrixXd& x, const std::vector<FeatureSpec>& specs, const Labels& labels,
                     const FilterParams& filter, const PolishParams& params) {
  return polish(x, specs, labels, sfil_flags(x, labels, filter), params);
}

Eigen::MatrixXd ppol(const Eigen::MatrixXd& x, const std::vector<FeatureSpec>& specs, const Labels& labels,
                     double fraction, const PandaParams& panda, const PolishParams& params) {
  check_labels(x, labels);
  return polish(x, specs, labels, pfil_flags(x, fraction, panda), params);
}

void write_ranking_csv(const NoiseRanking& ranking, std::ostream& out) {
  out << "rank,row,score\n";
  out.precision(17);
  for (std::size_t k = 0; k < ranking.ranking.size(); ++k)
    out << k + 1 << ',' << ranking.ranking[k] << ',' << ranking.scores[ranking.ranking[k]] << '\n';
}

}  // namespace attrnoise
