#include "attrnoise/noise.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>

namespace attrnoise {

bool NoisePlan::is_protocol_rate() const {
  return std::any_of(kProtocolNoiseRates.begin(), kProtocolNoiseRates.end(),
                     [&](double r) { return std::fabs(r - rate) < 1e-12; });
}

NoisyDataset inject_noise(const Dataset& ds, const NoisePlan& plan) {
  if (!(plan.rate >= 0.0 && plan.rate < 1.0)) throw std::invalid_argument("noise rate must lie in [0, 1)");
  NoisyDataset out{ds, NoiseMask::Zero(static_cast<Eigen::Index>(ds.n_rows()), static_cast<Eigen::Index>(ds.n_features())), {}};
  for (const auto& s : ds.specs())
    out.effective_rate.push_back(s.is_categorical() ? plan.rate * (1.0 - 1.0 / double(s.categories.size())) : plan.rate);
  if (plan.rate == 0.0) return out;

  std::mt19937_64 rng(plan.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    for (std::size_t j = 0; j < ds.n_features(); ++j) {
      if (!ds.observed(i, j)) continue;
      // One selection draw and one replacement draw per observed cell keeps
      // the stream layout independent of the rate.
      const double select = unit(rng);
      const double u = unit(rng);
      if (select >= plan.rate) continue;
      const auto& s = ds.spec(j);
      double value = 0.0;
      if (s.is_categorical()) {
        const auto k = s.categories.size();
        value = static_cast<double>(std::min(k - 1, static_cast<std::size_t>(u * double(k))));
      } else {
        value = s.observed_min + u * (s.observed_max - s.observed_min);
      }
      out.corrupted.set(i, j, value);
      out.noise_mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1;
    }
  }
  return out;
}

Eigen::MatrixXd encoded_noise_mask(const NoiseMask& mask, const std::vector<FeatureSpec>& specs) {
  if (mask.cols() != static_cast<Eigen::Index>(specs.size()))
    throw std::invalid_argument("encoded_noise_mask: feature count mismatch");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(mask.rows(), static_cast<Eigen::Index>(encoded_width(specs)));
  for (const auto& g : column_groups(specs))
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      if (mask(i, static_cast<Eigen::Index>(g.feature)))
        out.block(i, static_cast<Eigen::Index>(g.first), 1, static_cast<Eigen::Index>(g.width)).setOnes();
  return out;
}

void write_noise_mask_csv(const NoiseMask& mask, const std::vector<FeatureSpec>& specs, std::ostream& out) {
  for (std::size_t j = 0; j < specs.size(); ++j) out << (j ? "," : "") << csv_escape(specs[j].name);
  out << '\n';
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    for (Eigen::Index j = 0; j < mask.cols(); ++j) out << (j ? "," : "") << int(mask(i, j));
    out << '\n';
  }
}

}  // namespace attrnoise
