#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "attrnoise/config.hpp"
#include "attrnoise/results.hpp"
#include "attrnoise/runner.hpp"

using namespace attrnoise;
namespace fs = std::filesystem;

namespace {

ConfigResult parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, fs::temp_directory_path());
}

bool has_error(const ConfigResult& r, const std::string& needle) {
  for (const auto& e : r.errors)
    if (e.find(needle) != std::string::npos) return true;
  return false;
}

const char* kTiny = R"([experiment]
kind = impute
seeds = 0

[dataset]
rows = 60
continuous = 4
categorical = 1
seed = 3

[method mean]
imputer = mean
)";

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("attrnoise_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string strip_wall_time(const fs::path& csv) {
  std::ifstream in(csv);
  std::stringstream ss;
  ss << in.rdbuf();
  // wall_s is the only fixed-point field with six decimals
  return std::regex_replace(ss.str(), std::regex(R"(,\d+\.\d{6},)"), ",W,");
}

}  // namespace

TEST_CASE("config: minimal valid config echoes defaults") {
  const auto r = parse(kTiny);
  REQUIRE(r.ok());
  const auto& c = *r.config;
  CHECK(c.kind == ExperimentKind::impute);
  CHECK(c.noise_rates == std::vector<double>{0.0});
  CHECK(c.eval_folds == 5);
  CHECK(c.eval_tree.max_depth == 8);
  CHECK(c.eval_tree.min_leaf == 5);
  CHECK(c.alpha == 0.05);
  CHECK(c.methods.size() == 1);
  const auto text = describe_config(c);
  CHECK(text.find("tree_max_depth = 8") != std::string::npos);
  CHECK(text.find("rows = 60") != std::string::npos);
}

TEST_CASE("config: protocol grid is the default for noisy experiments") {
  std::string text = kTiny;
  text.replace(text.find("kind = impute"), 13, "kind = impute-under-noise");
  const auto r = parse(text);
  REQUIRE(r.ok());
  CHECK(r.config->noise_rates == std::vector<double>{0, 0.05, 0.10, 0.15, 0.20, 0.40, 0.60});
  CHECK(r.config->seeds == std::vector<std::uint64_t>{0});
}

TEST_CASE("config: every error is reported at once with its field path") {
  const auto r = parse(R"([experiment]
kind = impute-under-noise
noise_rates = 0.1, 1.5
seeds =
colour = blue

[dataset]
rows = 5

[method a]
imputer = gain

[method b]
imputer = nonsense

[method p]
kind = pipeline
imputer = sfil
corrector = spol

[method q]
kind = pipeline
imputer = mean
corrector = knn
)");
  CHECK(!r.ok());
  CHECK(has_error(r, "experiment.noise_rates[1]: rate 1.5 outside [0, 1)"));
  CHECK(has_error(r, "experiment.seeds"));
  CHECK(has_error(r, "experiment.colour: unknown key"));
  CHECK(has_error(r, "dataset.rows"));
  CHECK(has_error(r, "method.a.imputer: 'gain' is a reserved method name"));
  CHECK(has_error(r, "method.b.imputer: unknown imputation method 'nonsense'"));
  CHECK(has_error(r, "method.p.imputer: 'sfil' is a noise corrector; a pipeline pairs one imputer with one corrector"));
  CHECK(has_error(r, "method.q.corrector: 'knn' is an imputer; a pipeline pairs one imputer with one corrector"));
  CHECK(r.errors.size() >= 8);
}

TEST_CASE("config: impute experiments cannot take noise; structure errors") {
  std::string text = kTiny;
  text.insert(text.find("seeds"), "noise_rates = 0.2\n");
  CHECK(has_error(parse(text), "requires noise rates = {0}"));
  CHECK(has_error(parse("[dataset]\n"), "experiment: section missing"));
  CHECK(has_error(parse("x = 1\n"), "key outside of any section"));
  CHECK(has_error(parse(std::string(kTiny) + "\n[method mean]\nimputer = median\n"), "duplicate method id"));
  CHECK(has_error(parse(std::string(kTiny) + "\n[plots]\n"), "unknown section"));
}

TEST_CASE("config: csv datasets need a schema and a label") {
  const auto r = parse(R"([experiment]
kind = impute
[dataset]
source = csv
path = data.csv
[method m]
imputer = mean
)");
  CHECK(has_error(r, "dataset.label"));
  CHECK(has_error(r, "schema: csv datasets need a [schema] section"));
}

TEST_CASE("config: shipped configs validate") {
  for (const auto& entry : fs::directory_iterator(ATTRNOISE_SOURCE_DIR "/configs")) {
    CAPTURE(entry.path().string());
    const auto r = validate_config(entry.path());
    for (const auto& e : r.errors) MESSAGE(e);
    CHECK(r.ok());
  }
}

TEST_CASE("results.csv round trip, including error rows") {
  RunRecord ok{"exp", "ds,1", "m", 0.05, 3, 0.75, 0.8125, 1.5, R"({"kind":"imputer"})", std::nullopt};
  RunRecord bad{"exp", "ds,1", "c", 0.05, 3, std::nullopt, std::nullopt, 0.25, R"({"kind":"corrector"})",
                std::string("diverged \"badly\"")};
  std::stringstream s;
  write_results_csv({ok, bad}, s);
  const auto text = s.str();
  CHECK(text.rfind(std::string(kResultsHeader) + "\n", 0) == 0);
  const auto back = read_results_csv(s);
  REQUIRE(back.size() == 2);
  CHECK(back[0].dataset == "ds,1");
  CHECK(back[0].auc == 0.8125);
  CHECK(back[0].wall_seconds == 1.5);
  CHECK(back[0].method_kind() == "imputer");
  CHECK(!back[1].auc);
  CHECK(back[1].error == "diverged \"badly\"");
  CHECK(back[1].method_kind() == "corrector");
}

TEST_CASE("mark_significance over run records checks the cells") {
  std::vector<RunRecord> a, b;
  for (std::uint64_t s = 0; s < 10; ++s) {
    a.push_back({"e", "d", "x", 0.2, s, 0.9, 0.9 + 0.001 * s, 0, "{}", {}});
    b.push_back({"e", "d", "y", 0.2, s, 0.6, 0.6 + 0.001 * s, 0, "{}", {}});
  }
  CHECK(mark_significance(a, b, Metric::auc).mark == Mark::better);
  b[3].noise_rate = 0.4;
  CHECK_THROWS_AS(mark_significance(a, b, Metric::auc), std::invalid_argument);
  b.pop_back();
  CHECK_THROWS_AS(mark_significance(a, b, Metric::auc), std::invalid_argument);
}

TEST_CASE("run_experiment: one method, one seed, one row") {
  auto cfg = *parse(kTiny).config;
  cfg.output_dir = scratch("one_row");
  const auto out = run_experiment(cfg);
  CHECK(out.records.size() == 1);
  CHECK(out.failed_cells == 0);
  CHECK(read_results_csv(out.results_csv).size() == 1);
  CHECK(fs::exists(cfg.output_dir / "summary.md"));
  CHECK(fs::exists(cfg.output_dir / "ground_truth.csv"));
}

TEST_CASE("run_experiment: determinism, seed isolation, error rows, summary means") {
  auto cfg = *parse(R"([experiment]
kind = impute-under-noise
noise_rates = 0, 0.2
seeds = 1, 2

[dataset]
rows = 80
continuous = 5
categorical = 1

[method corr]
kind = corrector
input_mode = original-data
max_iterations = 100
probe_interval = 20

[method mean]
imputer = mean

[method broken]
imputer = knn
k = 500
)").config;
  cfg.output_dir = scratch("det_a");
  const auto a = run_experiment(cfg);
  CHECK(a.records.size() == 2 * 3 * 2);
  CHECK(a.failed_cells == 4);
  for (const auto& r : a.records)
    if (r.method == "broken") CHECK(r.error->find("k") != std::string::npos);
  CHECK(fs::exists(cfg.output_dir / "traces" / "corr__rate-0.2__seed-2.csv"));

  auto cfg_b = cfg;
  cfg_b.output_dir = scratch("det_b");
  cfg_b.workers = 3;
  run_experiment(cfg_b);
  CHECK(strip_wall_time(a.results_csv) == strip_wall_time(cfg_b.output_dir / "results.csv"));

  auto cfg_c = cfg;
  cfg_c.output_dir = scratch("det_c");
  cfg_c.seeds = {1, 7};
  const auto c = run_experiment(cfg_c);
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    if (a.records[k].seed != 1) continue;
    const auto& other = c.records[k];
    CHECK(other.seed == 1);
    CHECK(other.auc == a.records[k].auc);
    CHECK(other.balanced_accuracy == a.records[k].balanced_accuracy);
  }

  // summary means equal the arithmetic means of the CSV rows
  std::map<std::pair<std::string, double>, std::vector<double>> auc;
  for (const auto& r : read_results_csv(a.results_csv))
    if (r.ok()) auc[{r.method, r.noise_rate}].push_back(*r.auc);
  std::ifstream sm(a.summary_md);
  std::stringstream ss;
  ss << sm.rdbuf();
  const auto summary = ss.str();
  for (const auto& [key, v] : auc) {
    double m = 0;
    for (double x : v) m += x;
    m /= double(v.size());
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f ±", m);
    CAPTURE(key.first);
    CHECK(summary.find(buf) != std::string::npos);
  }
  CHECK(summary.find("### Failed cells") != std::string::npos);
  CHECK(summary.find("Reference method: corr") != std::string::npos);
}
