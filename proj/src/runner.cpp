#include "attrnoise/runner.hpp"

#include <atomic>
#include <bit>
#include <chrono>
#include <fstream>
#include <mutex>
#include <thread>

#include "attrnoise/noise.hpp"
#include "attrnoise/seeding.hpp"

namespace attrnoise {

LoadedDataset load_dataset(const DatasetSource& source) {
  if (source.synthetic) {
    auto s = synth_generate(source.synth);
    return {std::move(s.data), std::move(s.truth)};
  }
  return {load_csv(source.path, source.schema, source.csv), std::nullopt};
}

std::uint64_t noise_seed(std::uint64_t seed, double rate) {
  return derive_seed(seed, std::bit_cast<std::uint64_t>(rate));
}

std::uint64_t method_seed(std::uint64_t seed) { return derive_seed(seed, 0x6d6574686f64ULL); }

CellOutput apply_method(const MethodSpec& method, const EncodedMatrix& encoded, const Labels& labels,
                        std::uint64_t seed) {
  CellOutput out;
  const auto n = static_cast<std::size_t>(encoded.rows());
  out.kept_rows.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.kept_rows[i] = i;

  if (method.kind == MethodSpec::Kind::corrector) {
    CorrectorConfig cfg = method.corrector;
    cfg.seed = seed;
    cfg.probe_seed = seed;
    cfg.input_mode = method.input_mode.value_or(
        CorrectorConfig::defaults_for(static_cast<std::size_t>(encoded.cols())).input_mode);
    auto result = fit_correct(encoded, labels, cfg);
    out.matrix = std::move(result.corrected);
    out.trace = std::move(result.trace);
    return out;
  }

  ImputerSpec spec = method.imputer;
  spec.seed = seed;
  out.matrix = impute(encoded, spec);
  if (method.kind == MethodSpec::Kind::imputer) return out;

  FilterParams filter = method.filter;
  for (std::size_t k = 0; k < filter.seeds.size(); ++k) filter.seeds[k] = derive_seed(seed, 100 + k);
  switch (method.noise_corrector) {
    case NoiseCorrector::none: break;
    case NoiseCorrector::sfil: out.kept_rows = sfil(out.matrix, labels, filter); break;
    case NoiseCorrector::pfil: out.kept_rows = pfil(out.matrix, labels, method.noisy_fraction, method.panda); break;
    case NoiseCorrector::spol: out.matrix = spol(out.matrix, encoded.specs, labels, filter, method.polish); break;
    case NoiseCorrector::ppol:
      out.matrix = ppol(out.matrix, encoded.specs, labels, method.noisy_fraction, method.panda, method.polish);
      break;
  }
  return out;
}

RunRecord run_cell(const ExperimentConfig& config, const Dataset& base, const MethodSpec& method, double rate,
                   std::uint64_t seed, std::optional<TrainingTrace>* trace_out) {
  RunRecord rec;
  rec.experiment = config.name;
  rec.dataset = config.dataset.name;
  rec.method = method.id;
  rec.noise_rate = rate;
  rec.seed = seed;
  const auto mseed = method_seed(seed);
  rec.hyper_json = method.to_json(mseed);

  const auto start = std::chrono::steady_clock::now();
  try {
    if (!base.labels()) throw DataError("dataset has no labels; evaluation needs a binary label");
    const Labels& labels = *base.labels();
    const Dataset corrupted = rate > 0.0 ? inject_noise(base, {rate, noise_seed(seed, rate)}).corrupted : base;
    const EncodedMatrix encoded = encode(corrupted);
    MethodSpec resolved = method;
    if (resolved.kind == MethodSpec::Kind::corrector && !resolved.input_mode)
      resolved.input_mode = CorrectorConfig::defaults_for(static_cast<std::size_t>(encoded.cols())).input_mode;
    rec.hyper_json = resolved.to_json(mseed);
    CellOutput out = apply_method(resolved, encoded, labels, mseed);
    if (trace_out && out.trace) *trace_out = out.trace;

    const Eigen::MatrixXd snapped = snap(out.matrix, encoded.specs);
    std::vector<Eigen::Index> rows(out.kept_rows.begin(), out.kept_rows.end());
    Labels kept_labels;
    for (auto r : out.kept_rows) kept_labels.push_back(labels[r]);
    CvParams cv;
    cv.n_folds = config.eval_folds;
    cv.seeds = {seed};
    cv.tree = config.eval_tree;
    const auto report = cv_evaluate(snapped(rows, Eigen::all), kept_labels, cv);
    rec.balanced_accuracy = report.balanced_accuracy;
    rec.auc = report.auc;
  } catch (const TrainingAborted& e) {
    if (trace_out) *trace_out = e.trace();
    rec.error = e.what();
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

namespace {

std::string file_safe(const std::string& s) {
  std::string out;
  for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return out;
}

std::string rate_tag(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", rate);
  return buf;
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config, const ProgressFn& progress) {
  const LoadedDataset loaded = load_dataset(config.dataset);
  std::filesystem::create_directories(config.output_dir);
  write_csv(loaded.data, config.output_dir / "dataset.csv");
  if (loaded.truth) write_csv(*loaded.truth, config.output_dir / "ground_truth.csv");
  {
    std::ofstream schema(config.output_dir / "schema.txt");
    schema << format_schema(loaded.data.specs());
  }

  struct Job {
    std::size_t rate, method, seed;
  };
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < config.noise_rates.size(); ++r)
    for (std::size_t m = 0; m < config.methods.size(); ++m)
      for (std::size_t s = 0; s < config.seeds.size(); ++s) jobs.push_back({r, m, s});

  std::vector<RunRecord> records(jobs.size());
  std::vector<std::optional<TrainingTrace>> traces(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;

  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const auto& j = jobs[k];
      records[k] = run_cell(config, loaded.data, config.methods[j.method], config.noise_rates[j.rate],
                            config.seeds[j.seed], &traces[k]);
      const auto finished = ++done;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(records[k], finished, jobs.size());
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(config.workers, jobs.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  RunOutcome outcome;
  const auto trace_dir = config.output_dir / "traces";
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    if (!records[k].ok()) ++outcome.failed_cells;
    if (!traces[k]) continue;
    std::filesystem::create_directories(trace_dir);
    const auto& r = records[k];
    std::ofstream out(trace_dir / (file_safe(r.method) + "__rate-" + rate_tag(r.noise_rate) + "__seed-" +
                                   std::to_string(r.seed) + ".csv"));
    write_trace_csv(*traces[k], out);
  }
  outcome.records = std::move(records);
  outcome.results_csv = config.output_dir / "results.csv";
  outcome.summary_md = config.output_dir / "summary.md";
  write_results_csv(outcome.records, outcome.results_csv);
  // The summary is rendered from the CSV as written, not from in-memory state.
  const auto reread = read_results_csv(outcome.results_csv);
  std::ofstream summary(outcome.summary_md);
  summary << render_summary(reread, config.alpha);
  return outcome;
}

}  // namespace attrnoise
