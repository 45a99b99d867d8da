#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "attrnoise/config.hpp"
#include "attrnoise/corrector.hpp"
#include "attrnoise/results.hpp"
#include "attrnoise/tabular.hpp"

namespace attrnoise {

/// Loads (or generates) the configured dataset. Synthetic sources also
/// return their ground truth.
struct LoadedDataset {
  Dataset data;
  std::optional<Dataset> truth;
};
LoadedDataset load_dataset(const DatasetSource& source);

/// Output of one method on one (noise rate, seed) cell before evaluation.
struct CellOutput {
  Eigen::MatrixXd matrix;             // completed / corrected encoded matrix
  std::vector<std::size_t> kept_rows;  // rows that survive filtering
  std::optional<TrainingTrace> trace;  // corrector runs only
};

/// Seed of the noise draw for a cell; shared by every method so that all
/// methods see the same corrupted data.
std::uint64_t noise_seed(std::uint64_t seed, double rate);
/// Seed handed to stochastic methods for a cell.
std::uint64_t method_seed(std::uint64_t seed);

/// Applies one method to an encoded (possibly corrupted) dataset.
CellOutput apply_method(const MethodSpec& method, const EncodedMatrix& encoded, const Labels& labels,
                        std::uint64_t seed);

/// Runs a single cell end to end (noise, method, decode, evaluation). Never
/// throws for method failures: they become error records.
RunRecord run_cell(const ExperimentConfig& config, const Dataset& base, const MethodSpec& method, double rate,
                   std::uint64_t seed, std::optional<TrainingTrace>* trace_out = nullptr);

struct RunOutcome {
  std::vector<RunRecord> records;
  std::size_t failed_cells = 0;
  std::filesystem::path results_csv;
  std::filesystem::path summary_md;
};

using ProgressFn = std::function<void(const RunRecord&, std::size_t done, std::size_t total)>;

/// Runs every (noise rate, method, seed) cell, possibly on several workers,
/// then writes results.csv, summary.md (rendered from the records), and one
/// trace CSV per corrector cell under traces/. Records are ordered by cell
/// key, never by completion time.
RunOutcome run_experiment(const ExperimentConfig& config, const ProgressFn& progress = {});

}  // namespace attrnoise
