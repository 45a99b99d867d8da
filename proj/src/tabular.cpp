#include "attrnoise/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace attrnoise {

FeatureSpec FeatureSpec::continuous(std::string name) {
  FeatureSpec s;
  s.name = std::move(name);
  s.kind = FeatureKind::continuous;
  return s;
}

FeatureSpec FeatureSpec::categorical(std::string name, std::vector<std::string> categories) {
  FeatureSpec s;
  s.name = std::move(name);
  s.kind = FeatureKind::categorical;
  s.categories = std::move(categories);
  return s;
}

std::optional<std::size_t> FeatureSpec::category_index(const std::string& label) const {
  auto it = std::find(categories.begin(), categories.end(), label);
  if (it == categories.end()) return std::nullopt;
  return static_cast<std::size_t>(it - categories.begin());
}

void FeatureSpec::validate() const {
  if (name.empty()) throw DataError("feature with empty name");
  if (is_categorical()) {
    if (categories.empty()) throw DataError("categorical feature '" + name + "' has no categories");
    std::set<std::string> seen(categories.begin(), categories.end());
    if (seen.size() != categories.size())
      throw DataError("categorical feature '" + name + "' has duplicate categories");
  } else if (!(observed_min <= observed_max)) {
    throw DataError("continuous feature '" + name + "' has observed_min > observed_max");
  }
}

Dataset::Dataset(std::vector<FeatureSpec> specs, std::size_t n_rows)
    : n_rows_(n_rows), specs_(std::move(specs)), cells_(n_rows_ * specs_.size()) {
  std::set<std::string> names;
  for (const auto& s : specs_) {
    s.validate();
    if (!names.insert(s.name).second) throw DataError("duplicate feature name '" + s.name + "'");
  }
}

void Dataset::set(std::size_t i, std::size_t j, std::optional<double> value) {
  if (i >= n_rows_ || j >= specs_.size()) throw std::out_of_range("Dataset::set index out of range");
  if (value) {
    const auto& s = specs_[j];
    if (!std::isfinite(*value))
      throw DataError("non-finite value at row " + std::to_string(i) + ", column '" + s.name + "'");
    if (s.is_categorical()) {
      const double idx = *value;
      if (idx < 0 || idx >= static_cast<double>(s.categories.size()) || idx != std::floor(idx))
        throw DataError("category index out of range at row " + std::to_string(i) + ", column '" +
                        s.name + "'");
    }
  }
  cells_[i * specs_.size() + j] = value;
}

void Dataset::set_labels(Labels labels) {
  if (labels.size() != n_rows_) throw DataError("label count does not match row count");
  bool has0 = false, has1 = false;
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("labels must be binary 0/1");
    (y == 0 ? has0 : has1) = true;
  }
  if (!has0 || !has1) throw DataError("labels must contain both classes");
  labels_ = std::move(labels);
}

void Dataset::refresh_observed_ranges() {
  for (std::size_t j = 0; j < specs_.size(); ++j) {
    auto& s = specs_[j];
    if (s.is_categorical()) continue;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < n_rows_; ++i) {
      if (const auto& v = at(i, j)) {
        lo = std::min(lo, *v);
        hi = std::max(hi, *v);
      }
    }
    if (lo > hi) lo = hi = 0.0;  // no observed cell; encode() rejects this later
    s.observed_min = lo;
    s.observed_max = hi;
  }
}

void Dataset::adopt_specs(const std::vector<FeatureSpec>& specs) {
  if (specs.size() != specs_.size()) throw DataError("adopt_specs: feature count mismatch");
  for (std::size_t j = 0; j < specs.size(); ++j) {
    if (specs[j].kind != specs_[j].kind || specs[j].categories != specs_[j].categories ||
        specs[j].name != specs_[j].name)
      throw DataError("adopt_specs: incompatible spec for '" + specs[j].name + "'");
    specs[j].validate();
  }
  specs_ = specs;
}

std::size_t Dataset::missing_count() const {
  return static_cast<std::size_t>(
      std::count_if(cells_.begin(), cells_.end(), [](const auto& c) { return !c.has_value(); }));
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& rows) const {
  Dataset out(specs_, rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < specs_.size(); ++j) out.cells_[r * specs_.size() + j] = at(rows[r], j);
  if (labels_) {
    Labels sub;
    sub.reserve(rows.size());
    for (auto r : rows) sub.push_back((*labels_)[r]);
    const bool both = std::count(sub.begin(), sub.end(), 1) > 0 && std::count(sub.begin(), sub.end(), 0) > 0;
    if (both) out.labels_ = std::move(sub);
  }
  return out;
}

std::vector<ColumnGroup> column_groups(const std::vector<FeatureSpec>& specs) {
  std::vector<ColumnGroup> groups;
  groups.reserve(specs.size());
  std::size_t col = 0;
  for (std::size_t j = 0; j < specs.size(); ++j) {
    groups.push_back({j, col, specs[j].encoded_width()});
    col += specs[j].encoded_width();
  }
  return groups;
}

std::size_t encoded_width(const std::vector<FeatureSpec>& specs) {
  std::size_t w = 0;
  for (const auto& s : specs) w += s.encoded_width();
  return w;
}

EncodedMatrix encode(const Dataset& ds) {
  EncodedMatrix m;
  m.specs = ds.specs();
  m.groups = column_groups(m.specs);
  const auto n = static_cast<Eigen::Index>(ds.n_rows());
  const auto d = static_cast<Eigen::Index>(encoded_width(m.specs));
  m.values = Eigen::MatrixXd::Constant(n, d, kMissingPlaceholder);
  m.mask = Eigen::MatrixXd::Zero(n, d);
  m.column_feature.resize(static_cast<std::size_t>(d));

  for (const auto& g : m.groups) {
    const auto& s = m.specs[g.feature];
    for (std::size_t c = 0; c < g.width; ++c) m.column_feature[g.first + c] = g.feature;
    const auto col = static_cast<Eigen::Index>(g.first);

    if (!s.is_categorical()) {
      bool any = false;
      for (std::size_t i = 0; i < ds.n_rows(); ++i) any = any || ds.observed(i, g.feature);
      if (!any) throw DataError("continuous feature '" + s.name + "' has no observed cell");
      const double span = s.observed_max - s.observed_min;
      if (span <= 0.0) m.warnings.push_back("constant feature '" + s.name + "' encoded as 0.5");
      for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        const auto& v = ds.at(i, g.feature);
        if (!v) continue;
        const auto r = static_cast<Eigen::Index>(i);
        m.values(r, col) = span > 0.0 ? std::clamp((*v - s.observed_min) / span, 0.0, 1.0) : 0.5;
        m.mask(r, col) = 1.0;
      }
    } else {
      for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        const auto& v = ds.at(i, g.feature);
        if (!v) continue;
        const auto r = static_cast<Eigen::Index>(i);
        const auto width = static_cast<Eigen::Index>(g.width);
        m.values.block(r, col, 1, width).setZero();
        m.values(r, col + static_cast<Eigen::Index>(*v)) = 1.0;
        m.mask.block(r, col, 1, width).setOnes();
      }
    }
  }
  return m;
}

Dataset decode(const Eigen::MatrixXd& values, const std::vector<FeatureSpec>& specs) {
  if (values.cols() != static_cast<Eigen::Index>(encoded_width(specs)))
    throw DataError("decode: matrix width does not match specs");
  Dataset out(specs, static_cast<std::size_t>(values.rows()));
  for (const auto& g : column_groups(specs)) {
    const auto& s = specs[g.feature];
    const auto col = static_cast<Eigen::Index>(g.first);
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
      const auto i = static_cast<std::size_t>(r);
      if (!s.is_categorical()) {
        out.set(i, g.feature, s.observed_min + values(r, col) * (s.observed_max - s.observed_min));
      } else {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < static_cast<Eigen::Index>(g.width); ++c)
          if (values(r, col + c) > values(r, col + best)) best = c;
        out.set(i, g.feature, static_cast<double>(best));
      }
    }
  }
  return out;
}

Eigen::MatrixXd snap(const Eigen::MatrixXd& values, const std::vector<FeatureSpec>& specs) {
  return encode(decode(values, specs)).values;
}

SyntheticData synth_generate(const SyntheticParams& p) {
  if (p.n_rows < 10) throw DataError("synthetic data needs at least 10 rows");
  if (!(p.missing_rate >= 0.0 && p.missing_rate < 1.0))
    throw DataError("missing_rate must lie in [0, 1)");
  if (p.n_continuous + p.n_categorical == 0) throw DataError("synthetic data needs features");

  constexpr int kLatent = 3;
  constexpr double kFeatureNoise = 0.3;
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t n = p.n_rows;
  const std::size_t n_features = p.n_continuous + p.n_categorical;

  Eigen::MatrixXd latent(static_cast<Eigen::Index>(n), kLatent);
  for (Eigen::Index i = 0; i < latent.rows(); ++i)
    for (int k = 0; k < kLatent; ++k) latent(i, k) = normal(rng);

  auto draw_loadings = [&] {
    Eigen::Vector3d a;
    for (int k = 0; k < kLatent; ++k) a(k) = normal(rng);
    return a;
  };

  std::vector<FeatureSpec> specs;
  std::vector<std::vector<double>> columns(n_features, std::vector<double>(n));
  for (std::size_t j = 0; j < p.n_continuous; ++j) {
    const Eigen::Vector3d a = draw_loadings();
    const double offset = 100.0 * unit(rng);
    const double scale = 1.0 + 9.0 * unit(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = latent.row(static_cast<Eigen::Index>(i)).dot(a) + kFeatureNoise * normal(rng);
      columns[j][i] = offset + scale * x;
    }
    specs.push_back(FeatureSpec::continuous("x" + std::to_string(j)));
  }
  for (std::size_t j = 0; j < p.n_categorical; ++j) {
    const Eigen::Vector3d a = draw_loadings();
    const std::size_t n_cat = 2 + j % 3;
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i)
      score[i] = latent.row(static_cast<Eigen::Index>(i)).dot(a) + kFeatureNoise * normal(rng);
    std::vector<double> sorted = score;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> cuts;
    for (std::size_t c = 1; c < n_cat; ++c) cuts.push_back(sorted[c * n / n_cat]);
    auto& col = columns[p.n_continuous + j];
    for (std::size_t i = 0; i < n; ++i)
      col[i] = static_cast<double>(std::upper_bound(cuts.begin(), cuts.end(), score[i]) - cuts.begin());
    std::vector<std::string> cats;
    for (std::size_t c = 0; c < n_cat; ++c) cats.push_back("c" + std::to_string(c));
    specs.push_back(FeatureSpec::categorical("k" + std::to_string(j), std::move(cats)));
  }

  const Eigen::Vector3d w = draw_loadings();
  Labels labels(n);
  for (std::size_t i = 0; i < n; ++i)
    labels[i] = latent.row(static_cast<Eigen::Index>(i)).dot(w) + 0.5 * normal(rng) > 0.0 ? 1 : 0;
  if (std::count(labels.begin(), labels.end(), 1) == 0 || std::count(labels.begin(), labels.end(), 0) == 0)
    throw DataError("synthetic label rule produced a single class; try another seed");

  Dataset truth(specs, n);
  Dataset data(specs, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n_features; ++j) {
      truth.set(i, j, columns[j][i]);
      if (unit(rng) >= p.missing_rate) data.set(i, j, columns[j][i]);
    }
  }
  // A fully missing column cannot be encoded; keep its first cell.
  for (std::size_t j = 0; j < n_features; ++j) {
    bool any = false;
    for (std::size_t i = 0; i < n && !any; ++i) any = data.observed(i, j);
    if (!any) data.set(0, j, columns[j][0]);
  }
  data.set_labels(labels);
  truth.set_labels(labels);
  data.refresh_observed_ranges();
  truth.adopt_specs(data.specs());
  return {std::move(data), std::move(truth)};
}

}  // namespace attrnoise
