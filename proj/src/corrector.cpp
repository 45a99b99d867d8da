#include "attrnoise/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include <json.hpp>

#include "attrnoise/metrics.hpp"
#include "attrnoise/seeding.hpp"

namespace attrnoise {

const char* to_string(InputMode m) { return m == InputMode::random_noise ? "random-noise" : "original-data"; }
const char* to_string(StopMetric m) { return m == StopMetric::supervised_auc ? "supervised-auc" : "training-loss"; }
const char* to_string(Architecture a) { return a == Architecture::dense ? "dense" : "conv1d"; }

std::optional<InputMode> input_mode_from_string(const std::string& s) {
  if (s == "random-noise") return InputMode::random_noise;
  if (s == "original-data") return InputMode::original_data;
  return std::nullopt;
}

std::optional<StopMetric> stop_metric_from_string(const std::string& s) {
  if (s == "supervised-auc") return StopMetric::supervised_auc;
  if (s == "training-loss") return StopMetric::training_loss;
  return std::nullopt;
}

std::optional<Architecture> architecture_from_string(const std::string& s) {
  if (s == "dense") return Architecture::dense;
  if (s == "conv1d") return Architecture::conv1d;
  return std::nullopt;
}

CorrectorConfig CorrectorConfig::defaults_for(std::size_t encoded_width) {
  CorrectorConfig c;
  c.input_mode = encoded_width < 64 ? InputMode::random_noise : InputMode::original_data;
  return c;
}

void CorrectorConfig::validate() const {
  if (probe_interval < 1) throw std::invalid_argument("corrector: probe_interval must be >= 1");
  if (patience < 1) throw std::invalid_argument("corrector: patience must be >= 1");
  if (max_iterations < probe_interval) throw std::invalid_argument("corrector: max_iterations must be >= probe_interval");
  if (!(optimizer.learning_rate > 0.0)) throw std::invalid_argument("corrector: learning rate must be > 0");
  if (probe_tree_depth < 1) throw std::invalid_argument("corrector: probe_tree_depth must be >= 1");
  for (const auto& l : layers) l.validate();
}

std::vector<nn::LayerSpec> CorrectorConfig::resolve_layers(std::size_t encoded_width) const {
  std::vector<nn::LayerSpec> specs = layers;
  if (specs.empty())
    specs = architecture == Architecture::dense ? nn::dense_autoencoder(encoded_width) : nn::conv_autoencoder(encoded_width);
  if (specs.front().input_width() != encoded_width || specs.back().output_width() != encoded_width)
    throw std::invalid_argument("corrector: architecture must map width " + std::to_string(encoded_width) + " to itself");
  if (specs.back().activation != nn::Activation::sigmoid)
    throw std::invalid_argument("corrector: output layer must use a sigmoid activation");
  return specs;
}

std::string CorrectorConfig::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = "corrector";
  j["input_mode"] = to_string(input_mode);
  j["architecture"] = layers.empty() ? to_string(architecture) : "custom";
  j["learning_rate"] = optimizer.learning_rate;
  j["beta1"] = optimizer.beta1;
  j["beta2"] = optimizer.beta2;
  j["epsilon"] = optimizer.epsilon;
  j["max_iterations"] = max_iterations;
  j["probe_interval"] = probe_interval;
  j["patience"] = patience;
  j["stop_metric"] = to_string(stop_metric);
  j["probe_tree_depth"] = probe_tree_depth;
  j["seed"] = seed;
  j["probe_seed"] = probe_seed;
  return j.dump();
}

Eigen::MatrixXd make_input(InputMode mode, const EncodedMatrix& encoded, std::uint64_t seed) {
  if (mode == InputMode::original_data) return encoded.values;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd z(encoded.rows(), encoded.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r)
    for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = unit(rng);
  return z;
}

double probe_auc(const Eigen::MatrixXd& x_hat, const std::vector<FeatureSpec>& specs, const Labels& labels,
                 std::uint64_t probe_seed, std::size_t tree_depth) {
  CvParams cv;
  cv.n_folds = 5;
  cv.seeds = {probe_seed};
  cv.tree.max_depth = tree_depth;
  return cv_evaluate(snap(x_hat, specs), labels, cv).auc;
}

namespace {

double observed_mae(const Eigen::MatrixXd& x_hat, const EncodedMatrix& enc, double n_observed) {
  return ((x_hat - enc.values).array().abs() * enc.mask.array()).sum() / n_observed;
}

}  // namespace

CorrectionResult fit_correct(const EncodedMatrix& encoded, const std::optional<Labels>& labels,
                             const CorrectorConfig& config) {
  config.validate();
  const bool use_auc = config.stop_metric == StopMetric::supervised_auc;
  if (use_auc) {
    if (!labels) throw std::invalid_argument("corrector: supervised-auc stopping needs labels");
    if (labels->size() != static_cast<std::size_t>(encoded.rows()))
      throw std::invalid_argument("corrector: label count does not match rows");
    const auto ones = std::count(labels->begin(), labels->end(), 1);
    if (ones == 0 || ones == static_cast<long>(labels->size()))
      throw std::invalid_argument("corrector: labels must contain both classes");
  }
  const double n_observed = encoded.mask.sum();
  if (n_observed == 0.0) throw std::invalid_argument("corrector: no observed cells");

  const auto width = static_cast<std::size_t>(encoded.cols());
  const auto specs = config.resolve_layers(width);
  nn::ModelParams params = nn::init_params(specs, derive_seed(config.seed, 1));
  auto adam = nn::AdamState::for_params(params, config.optimizer);
  const Eigen::MatrixXd input = make_input(config.input_mode, encoded, derive_seed(config.seed, 2));

  CorrectionResult result;
  auto& trace = result.trace;
  trace.metric = config.stop_metric;
  double best_metric = 0.0;
  double baseline_mae = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  for (std::size_t it = 0;; ++it) {
    auto fr = nn::forward(params, input);
    const bool probe_now = it % config.probe_interval == 0 || it == config.max_iterations;
    if (probe_now) {
      ProbeRecord rec;
      rec.iteration = it;
      rec.loss = nn::masked_mse(fr.output, encoded.values, encoded.mask);
      rec.snapshot_id = trace.probes.size();
      if (!std::isfinite(rec.loss)) {
        throw TrainingAborted("corrector: non-finite loss at iteration " + std::to_string(it), trace);
      }
      rec.observed_mae = observed_mae(fr.output, encoded, n_observed);
      rec.metric = use_auc ? probe_auc(fr.output, encoded.specs, *labels, config.probe_seed, config.probe_tree_depth)
                           : rec.loss;
      if (it == 0) baseline_mae = rec.observed_mae;
      trace.probes.push_back(rec);

      const bool eligible = rec.observed_mae <= baseline_mae;
      const bool improved = eligible && (trace.probes.size() == 1 ||
                                         (use_auc ? rec.metric > best_metric : rec.metric < best_metric));
      if (improved) {
        best_metric = rec.metric;
        trace.chosen_snapshot = rec.snapshot_id;
        result.snapshot = {it, fr.output};
        stale = 0;
      } else if (++stale >= config.patience) {
        trace.early_stopped = true;
        break;
      }
    }
    if (it == config.max_iterations) break;

    try {
      const auto grads = nn::backward(params, fr.cache, fr.output, encoded.values, encoded.mask);
      nn::adam_step(params, grads, adam);
    } catch (const nn::NonFiniteError& e) {
      throw TrainingAborted(std::string("corrector: ") + e.what(), trace);
    }
  }
  result.corrected = result.snapshot.x_hat;
  return result;
}

void write_trace_csv(const TrainingTrace& trace, std::ostream& out) {
  out << "iteration,loss,metric,chosen\n";
  out.precision(17);
  for (const auto& p : trace.probes)
    out << p.iteration << ',' << p.loss << ',' << p.metric << ',' << (p.snapshot_id == trace.chosen_snapshot ? 1 : 0)
        << '\n';
}

}  // namespace attrnoise
