#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "attrnoise/nn.hpp"
#include "attrnoise/tabular.hpp"

namespace attrnoise {

enum class ImputerMethod { mean, median, knn, softimpute, mice_lite, mida };

const char* to_string(ImputerMethod m);
std::optional<ImputerMethod> imputer_from_string(const std::string& s);

/// Method names reserved for externally produced results; no implementation.
inline const std::vector<std::string> kReservedImputers{"gain", "sinkhorn", "missforest"};

struct KnnHyper {
  int k = 5;
};

struct SoftImputeHyper {
  /// Shrinkage; unset means 0.1 * largest singular value of the mean-filled matrix.
  std::optional<double> lambda;
  /// 0 means min(n, d).
  int max_rank = 0;
  int max_sweeps = 100;
  double tolerance = 1e-5;
};

struct MiceHyper {
  int sweeps = 10;
  double ridge = 1e-3;
};

struct MidaHyper {
  /// Extra width per hidden level: d -> d+step -> d+2step -> d+step -> d.
  int width_step = 7;
  double corruption = 0.25;
  int iterations = 500;
  nn::AdamHyper optimizer{0.01, 0.9, 0.999, 1e-8};
};

struct ImputerSpec {
  ImputerMethod method = ImputerMethod::mean;
  KnnHyper knn;
  SoftImputeHyper softimpute;
  MiceHyper mice;
  MidaHyper mida;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on out-of-range hyperparameters.
  void validate() const;
  /// JSON object echoing the method and its hyperparameters.
  std::string to_json() const;
};

/// Completes the matrix. Observed cells are returned unchanged; imputed
/// cells are finite and clamped to [0,1].
Eigen::MatrixXd impute(const EncodedMatrix& encoded, const ImputerSpec& spec);

// Individual methods, with the diagnostics their tests need.

Eigen::MatrixXd impute_mean(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask);
Eigen::MatrixXd impute_median(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask);
Eigen::MatrixXd impute_knn(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask, const KnnHyper& hyper);

struct SoftImputeResult {
  Eigen::MatrixXd completed;
  /// 0.5 * ||P_obs(X - Z)||^2 + lambda * ||Z||_* after each sweep.
  std::vector<double> objective;
  double lambda = 0.0;
  int rank = 0;
};
SoftImputeResult soft_impute(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask, const SoftImputeHyper& hyper);

struct MiceResult {
  Eigen::MatrixXd completed;
  /// Mean absolute change of the imputed cells in each sweep.
  std::vector<double> sweep_change;
};
MiceResult mice_lite(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask, const MiceHyper& hyper);

Eigen::MatrixXd impute_mida(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask, const MidaHyper& hyper,
                            std::uint64_t seed);

}  // namespace attrnoise
