#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "attrnoise/config.hpp"
#include "attrnoise/results.hpp"
#include "attrnoise/runner.hpp"

using namespace attrnoise;

namespace {

int print_config_errors(const ConfigResult& r) {
  for (const auto& e : r.errors) std::cerr << "config error: " << e << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attribute-noise correction benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::size_t workers = 0;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "run every cell of an experiment config");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--workers", workers, "override experiment.workers");
  run->add_flag("--quiet", quiet, "no per-cell progress");

  auto* validate = app.add_subcommand("validate", "check a config and print its canonical form");
  validate->add_option("config", config_path, "experiment config file")->required();

  SyntheticParams synth;
  std::filesystem::path synth_out = "synthetic";
  auto* gen = app.add_subcommand("synth", "write a synthetic dataset with its ground truth");
  gen->add_option("--rows", synth.n_rows);
  gen->add_option("--continuous", synth.n_continuous);
  gen->add_option("--categorical", synth.n_categorical);
  gen->add_option("--missing-rate", synth.missing_rate);
  gen->add_option("--seed", synth.seed);
  gen->add_option("--out", synth_out, "output directory");

  std::filesystem::path results_path;
  double alpha = 0.05;
  auto* report = app.add_subcommand("report", "regenerate summary.md from a results.csv");
  report->add_option("results", results_path)->required();
  report->add_option("--alpha", alpha);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      const auto r = validate_config(config_path);
      if (!r.ok()) return print_config_errors(r);
      std::cout << describe_config(*r.config);
      return 0;
    }
    if (*run) {
      const auto r = validate_config(config_path);
      if (!r.ok()) return print_config_errors(r);
      ExperimentConfig config = *r.config;
      if (workers > 0) config.workers = workers;
      ProgressFn progress;
      if (!quiet)
        progress = [](const RunRecord& rec, std::size_t done, std::size_t total) {
          std::fprintf(stderr, "[%zu/%zu] %s rate=%g seed=%llu %s\n", done, total, rec.method.c_str(),
                       rec.noise_rate, static_cast<unsigned long long>(rec.seed),
                       rec.ok() ? "ok" : rec.error->c_str());
        };
      const auto outcome = run_experiment(config, progress);
      std::cout << "wrote " << outcome.results_csv.string() << " and " << outcome.summary_md.string() << '\n';
      if (outcome.failed_cells > 0)
        std::cerr << outcome.failed_cells << " of " << outcome.records.size() << " cells failed\n";
      return !outcome.records.empty() && outcome.failed_cells == outcome.records.size() ? 2 : 0;
    }
    if (*gen) {
      const auto s = synth_generate(synth);
      std::filesystem::create_directories(synth_out);
      write_csv(s.data, synth_out / "dataset.csv");
      write_csv(s.truth, synth_out / "ground_truth.csv");
      std::ofstream(synth_out / "schema.txt") << format_schema(s.data.specs());
      std::cout << "wrote " << synth_out.string() << '\n';
      return 0;
    }
    if (*report) {
      const auto records = read_results_csv(results_path);
      const auto out = results_path.parent_path() / "summary.md";
      std::ofstream(out) << render_summary(records, alpha);
      std::cout << "wrote " << out.string() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
