#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "attrnoise/metrics.hpp"

namespace attrnoise {

/// One (method, dataset, noise rate, seed) cell. Failed cells carry an
/// error message and no metrics.
struct RunRecord {
  std::string experiment;
  std::string dataset;
  std::string method;
  double noise_rate = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> balanced_accuracy;
  std::optional<double> auc;
  double wall_seconds = 0.0;
  std::string hyper_json = "{}";
  std::optional<std::string> error;

  bool ok() const { return !error.has_value(); }
  /// "corrector", "imputer" or "pipeline", read from the hyper echo.
  std::string method_kind() const;
};

enum class Metric { auc, balanced_accuracy };
const char* to_string(Metric m);
double metric_value(const RunRecord& r, Metric m);

inline constexpr const char* kResultsHeader = "experiment,dataset,method,noise_rate,seed,bal_acc,auc,wall_s,hyper_json_echo";

void write_results_csv(const std::vector<RunRecord>& records, std::ostream& out);
void write_results_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path);
std::vector<RunRecord> read_results_csv(std::istream& in);
std::vector<RunRecord> read_results_csv(const std::filesystem::path& path);

/// Compares two sets of runs of the same (experiment, dataset, noise rate)
/// cell. Throws std::invalid_argument on mismatched cells or counts.
SignificanceMark mark_significance(const std::vector<RunRecord>& ours, const std::vector<RunRecord>& theirs,
                                   Metric metric, double alpha = 0.05);

/// Markdown tables (mean ± std per method and noise rate, one table per
/// dataset and metric) with significance marks of the first corrector method
/// against every other method. Derived from the records only.
std::string render_summary(const std::vector<RunRecord>& records, double alpha = 0.05);

}  // namespace attrnoise
