#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

#include "attrnoise/tabular.hpp"

namespace attrnoise {

/// Noise rates of the benchmark protocol.
inline constexpr std::array<double, 7> kProtocolNoiseRates{0.0, 0.05, 0.10, 0.15, 0.20, 0.40, 0.60};

struct NoisePlan {
  double rate = 0.0;
  std::uint64_t seed = 0;
  bool is_protocol_rate() const;
};

/// n_rows x n_features; 1 marks a corrupted cell. Always a subset of the
/// observed cells.
using NoiseMask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

struct NoisyDataset {
  Dataset corrupted;
  NoiseMask noise_mask;
  /// Expected fraction of cells whose value actually changes, per feature:
  /// rate for continuous, rate * (1 - 1/|categories|) for categorical.
  std::vector<double> effective_rate;
};

/// Each observed cell is selected with probability `rate` and replaced by a
/// uniform draw: over [observed_min, observed_max] for continuous features,
/// over the category list for categorical ones (which may redraw the original).
/// Missingness, labels and specs are unchanged.
NoisyDataset inject_noise(const Dataset& ds, const NoisePlan& plan);

/// Expands a feature-level noise mask to the encoded column layout.
Eigen::MatrixXd encoded_noise_mask(const NoiseMask& mask, const std::vector<FeatureSpec>& specs);

void write_noise_mask_csv(const NoiseMask& mask, const std::vector<FeatureSpec>& specs, std::ostream& out);

}  // namespace attrnoise
