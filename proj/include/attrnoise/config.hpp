#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "attrnoise/corrector.hpp"
#include "attrnoise/imputers.hpp"
#include "attrnoise/metrics.hpp"
#include "attrnoise/polish.hpp"
#include "attrnoise/tabular.hpp"

namespace attrnoise {

enum class ExperimentKind { impute, impute_under_noise, pipeline_vs_corrector };
enum class NoiseCorrector { none, sfil, pfil, spol, ppol };

const char* to_string(ExperimentKind k);
const char* to_string(NoiseCorrector c);
std::optional<ExperimentKind> experiment_from_string(const std::string& s);
std::optional<NoiseCorrector> noise_corrector_from_string(const std::string& s);

struct MethodSpec {
  enum class Kind { imputer, corrector, pipeline };

  std::string id;
  Kind kind = Kind::imputer;
  ImputerSpec imputer;  // imputer and pipeline methods
  CorrectorConfig corrector;
  /// Unset: chosen from the encoded width at run time.
  std::optional<InputMode> input_mode;
  NoiseCorrector noise_corrector = NoiseCorrector::none;
  double noisy_fraction = 0.10;
  FilterParams filter;
  PandaParams panda;
  PolishParams polish;

  const char* kind_name() const;
  /// Hyperparameter echo for RunRecords; `seed` is the cell seed.
  std::string to_json(std::uint64_t seed) const;
};

struct DatasetSource {
  std::string name = "synthetic";
  bool synthetic = true;
  SyntheticParams synth;
  std::filesystem::path path;
  std::vector<FeatureSpec> schema;
  CsvOptions csv;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::impute;
  std::string name;
  DatasetSource dataset;
  std::vector<MethodSpec> methods;
  std::vector<double> noise_rates{0.0};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::filesystem::path output_dir = "results";
  std::size_t workers = 1;
  int eval_folds = 5;
  TreeParams eval_tree{};
  double alpha = 0.05;
};

struct ConfigResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;  // "section.key: message"
  bool ok() const { return config.has_value() && errors.empty(); }
};

/// Parses the sectioned key/value format described in docs/config-format.md.
/// Relative paths resolve against `base_dir`. Collects every error.
ConfigResult parse_config(std::istream& in, const std::filesystem::path& base_dir = ".");
ConfigResult validate_config(const std::filesystem::path& path);

/// Canonical text form of a parsed config, defaults included.
std::string describe_config(const ExperimentConfig& config);

}  // namespace attrnoise
