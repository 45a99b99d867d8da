#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "attrnoise/nn.hpp"
#include "attrnoise/tabular.hpp"

namespace attrnoise {

/// What the generator is fed: a fixed uniform-noise matrix, or the encoded
/// data itself (placeholders at missing cells). Either way the input is
/// drawn once and never resampled during training.
enum class InputMode { random_noise, original_data };
enum class StopMetric { supervised_auc, training_loss };
enum class Architecture { dense, conv1d };

const char* to_string(InputMode m);
const char* to_string(StopMetric m);
const char* to_string(Architecture a);
std::optional<InputMode> input_mode_from_string(const std::string& s);
std::optional<StopMetric> stop_metric_from_string(const std::string& s);
std::optional<Architecture> architecture_from_string(const std::string& s);

struct CorrectorConfig {
  InputMode input_mode = InputMode::random_noise;
  Architecture architecture = Architecture::dense;
  /// Explicit layer list; overrides `architecture` when non-empty.
  std::vector<nn::LayerSpec> layers;
  nn::AdamHyper optimizer;
  std::size_t max_iterations = 10000;
  std::size_t probe_interval = 50;
  std::size_t patience = 5;
  StopMetric stop_metric = StopMetric::supervised_auc;
  std::uint64_t seed = 0;
  std::uint64_t probe_seed = 0;
  /// Depth of the probe tree; the probe uses 5-fold stratified CV.
  std::size_t probe_tree_depth = 5;

  /// Defaults that depend on the encoded width: random-noise input below 64
  /// columns, original-data input from 64 columns up.
  static CorrectorConfig defaults_for(std::size_t encoded_width);

  void validate() const;
  std::vector<nn::LayerSpec> resolve_layers(std::size_t encoded_width) const;
  std::string to_json() const;
};

struct ProbeRecord {
  std::size_t iteration = 0;
  double loss = 0.0;
  double metric = 0.0;
  /// Mean |x_hat - x| over observed cells.
  double observed_mae = 0.0;
  std::size_t snapshot_id = 0;
};

struct TrainingTrace {
  std::vector<ProbeRecord> probes;
  std::size_t chosen_snapshot = 0;
  StopMetric metric = StopMetric::training_loss;
  bool early_stopped = false;

  const ProbeRecord& chosen() const { return probes.at(chosen_snapshot); }
};

struct ReconstructionSnapshot {
  std::size_t iteration = 0;
  Eigen::MatrixXd x_hat;
};

struct CorrectionResult {
  Eigen::MatrixXd corrected;
  TrainingTrace trace;
  ReconstructionSnapshot snapshot;
};

/// Non-finite loss during training; carries the trace recorded so far.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, TrainingTrace trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const TrainingTrace& trace() const { return trace_; }

 private:
  TrainingTrace trace_;
};

Eigen::MatrixXd make_input(InputMode mode, const EncodedMatrix& encoded, std::uint64_t seed);

/// Mean AUC of a stratified 5-fold decision-tree CV on the decoded
/// reconstruction. Deterministic in probe_seed.
double probe_auc(const Eigen::MatrixXd& x_hat, const std::vector<FeatureSpec>& specs, const Labels& labels,
                 std::uint64_t probe_seed, std::size_t tree_depth = 5);

/// Trains a generator on the masked reconstruction loss, probing every
/// probe_interval iterations and stopping after `patience` probes without
/// improvement. Returns the best probe's reconstruction. Its observed-cell
/// MAE never exceeds the one at iteration 0.
CorrectionResult fit_correct(const EncodedMatrix& encoded, const std::optional<Labels>& labels,
                             const CorrectorConfig& config);

/// iteration,loss,metric,chosen
void write_trace_csv(const TrainingTrace& trace, std::ostream& out);

}  // namespace attrnoise
