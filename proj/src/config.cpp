#include "attrnoise/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "attrnoise/noise.hpp"

namespace attrnoise {

const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::impute: return "impute";
    case ExperimentKind::impute_under_noise: return "impute-under-noise";
    case ExperimentKind::pipeline_vs_corrector: return "pipeline-vs-corrector";
  }
  return "?";
}

const char* to_string(NoiseCorrector c) {
  switch (c) {
    case NoiseCorrector::none: return "none";
    case NoiseCorrector::sfil: return "sfil";
    case NoiseCorrector::pfil: return "pfil";
    case NoiseCorrector::spol: return "spol";
    case NoiseCorrector::ppol: return "ppol";
  }
  return "?";
}

std::optional<ExperimentKind> experiment_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::impute, ExperimentKind::impute_under_noise, ExperimentKind::pipeline_vs_corrector})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

std::optional<NoiseCorrector> noise_corrector_from_string(const std::string& s) {
  for (auto c : {NoiseCorrector::none, NoiseCorrector::sfil, NoiseCorrector::pfil, NoiseCorrector::spol,
                 NoiseCorrector::ppol})
    if (s == to_string(c)) return c;
  return std::nullopt;
}

const char* MethodSpec::kind_name() const {
  switch (kind) {
    case Kind::imputer: return "imputer";
    case Kind::corrector: return "corrector";
    case Kind::pipeline: return "pipeline";
  }
  return "?";
}

std::string MethodSpec::to_json(std::uint64_t seed) const {
  nlohmann::ordered_json j;
  j["kind"] = kind_name();
  if (kind == Kind::corrector) {
    CorrectorConfig c = corrector;
    c.seed = seed;
    c.probe_seed = seed;
    if (input_mode) c.input_mode = *input_mode;
    j["corrector"] = nlohmann::ordered_json::parse(c.to_json());
    if (!input_mode) j["corrector"]["input_mode"] = "auto";
  } else {
    ImputerSpec s = imputer;
    s.seed = seed;
    j["imputer"] = nlohmann::ordered_json::parse(s.to_json());
  }
  if (kind == Kind::pipeline) {
    j["noise_corrector"] = to_string(noise_corrector);
    if (noise_corrector == NoiseCorrector::pfil || noise_corrector == NoiseCorrector::ppol) {
      j["fraction"] = noisy_fraction;
      j["panda_bins"] = panda.bins;
    }
    if (noise_corrector == NoiseCorrector::sfil || noise_corrector == NoiseCorrector::spol)
      j["filter_votes"] = filter.seeds.size();
    if (noise_corrector == NoiseCorrector::spol || noise_corrector == NoiseCorrector::ppol) {
      j["polish_depth"] = polish.tree.max_depth;
      j["require_fix"] = polish.require_fix;
    }
  }
  return j.dump();
}

namespace {

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

struct Section {
  std::string kind;  // experiment, dataset, schema, method
  std::string arg;   // method id
  int line = 0;
  std::vector<Entry> entries;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

class Reader {
 public:
  Reader(const Section& section, std::string path, std::vector<std::string>& errors)
      : section_(section), path_(std::move(path)), errors_(errors) {}

  ~Reader() {
    for (const auto& e : section_.entries)
      if (!used_.count(e.key)) error(e.key, "unknown key");
  }

  const Entry* find(const std::string& key) {
    used_.insert(key);
    const Entry* found = nullptr;
    for (const auto& e : section_.entries)
      if (e.key == key) found = &e;
    return found;
  }

  void error(const std::string& key, const std::string& msg) { errors_.push_back(path_ + "." + key + ": " + msg); }

  std::optional<std::string> text(const std::string& key) {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    return e->value;
  }

  template <typename T>
  void number(const std::string& key, T& out, std::optional<double> lo = {}, std::optional<double> hi = {},
              bool hi_open = false) {
    const Entry* e = find(key);
    if (!e) return;
    T v{};
    const char* first = e->value.data();
    const char* last = first + e->value.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || e->value.empty()) {
      error(key, "'" + e->value + "' is not a valid number");
      return;
    }
    const double dv = static_cast<double>(v);
    if ((lo && dv < *lo) || (hi && (hi_open ? dv >= *hi : dv > *hi))) {
      std::ostringstream os;
      os << "value " << e->value << " outside [" << (lo ? std::to_string(*lo) : "-inf") << ", "
         << (hi ? std::to_string(*hi) : "inf") << (hi_open ? ")" : "]");
      error(key, os.str());
      return;
    }
    out = v;
  }

  void boolean(const std::string& key, bool& out) {
    const Entry* e = find(key);
    if (!e) return;
    if (e->value == "true" || e->value == "1" || e->value == "yes")
      out = true;
    else if (e->value == "false" || e->value == "0" || e->value == "no")
      out = false;
    else
      error(key, "'" + e->value + "' is not a boolean");
  }

  const std::string& path() const { return path_; }

 private:
  const Section& section_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> used_;
};

std::optional<double> to_double(const std::string& s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> to_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

void read_imputer_hyper(Reader& r, ImputerSpec& spec) {
  switch (spec.method) {
    case ImputerMethod::knn: r.number("k", spec.knn.k, 1.0); break;
    case ImputerMethod::softimpute: {
      if (auto v = r.text("lambda")) {
        if (*v != "auto") {
          if (auto d = to_double(*v); d && *d >= 0.0)
            spec.softimpute.lambda = *d;
          else
            r.error("lambda", "'" + *v + "' must be 'auto' or a number >= 0");
        }
      }
      r.number("max_rank", spec.softimpute.max_rank, 0.0);
      r.number("max_sweeps", spec.softimpute.max_sweeps, 1.0);
      r.number("tolerance", spec.softimpute.tolerance, 0.0);
      break;
    }
    case ImputerMethod::mice_lite:
      r.number("sweeps", spec.mice.sweeps, 1.0);
      r.number("ridge", spec.mice.ridge, 0.0);
      break;
    case ImputerMethod::mida:
      r.number("width_step", spec.mida.width_step, 0.0);
      r.number("corruption", spec.mida.corruption, 0.0, 1.0, true);
      r.number("iterations", spec.mida.iterations, 1.0);
      r.number("learning_rate", spec.mida.optimizer.learning_rate, 0.0);
      break;
    default:
      break;
  }
}

std::optional<ImputerMethod> read_imputer_name(Reader& r, const std::string& key, bool pipeline) {
  const auto name = r.text(key);
  if (!name) {
    r.error(key, "missing");
    return std::nullopt;
  }
  if (auto m = imputer_from_string(*name)) return m;
  if (std::find(kReservedImputers.begin(), kReservedImputers.end(), *name) != kReservedImputers.end()) {
    r.error(key, "'" + *name + "' is a reserved method name without an implementation");
  } else if (pipeline && (noise_corrector_from_string(*name) || *name == "corrector")) {
    r.error(key, "'" + *name + "' is a noise corrector; a pipeline pairs one imputer with one corrector");
  } else {
    r.error(key, "unknown imputation method '" + *name + "'");
  }
  return std::nullopt;
}

void read_method(const Section& sec, ExperimentConfig& cfg, std::vector<std::string>& errors) {
  MethodSpec m;
  m.id = sec.arg;
  Reader r(sec, "method." + (m.id.empty() ? std::string("?") : m.id), errors);
  if (m.id.empty()) r.error("id", "method section needs an id: [method <id>]");
  if (m.id.find_first_of(",\"\n") != std::string::npos) r.error("id", "method id must not contain commas or quotes");

  const auto kind = r.text("kind").value_or("imputer");
  if (kind == "imputer") {
    m.kind = MethodSpec::Kind::imputer;
    if (auto im = read_imputer_name(r, "imputer", false)) {
      m.imputer.method = *im;
      read_imputer_hyper(r, m.imputer);
    }
  } else if (kind == "corrector") {
    m.kind = MethodSpec::Kind::corrector;
    auto& c = m.corrector;
    if (auto v = r.text("input_mode"); v && *v != "auto") {
      if (auto im = input_mode_from_string(*v))
        m.input_mode = *im;
      else
        r.error("input_mode", "unknown input mode '" + *v + "' (random-noise, original-data, auto)");
    }
    if (auto v = r.text("architecture")) {
      if (auto a = architecture_from_string(*v))
        c.architecture = *a;
      else
        r.error("architecture", "unknown architecture '" + *v + "' (dense, conv1d)");
    }
    if (auto v = r.text("stop_metric")) {
      if (auto s = stop_metric_from_string(*v))
        c.stop_metric = *s;
      else
        r.error("stop_metric", "unknown stop metric '" + *v + "' (supervised-auc, training-loss)");
    }
    r.number("max_iterations", c.max_iterations, 1.0);
    r.number("probe_interval", c.probe_interval, 1.0);
    r.number("patience", c.patience, 1.0);
    r.number("probe_tree_depth", c.probe_tree_depth, 1.0);
    r.number("learning_rate", c.optimizer.learning_rate, 0.0);
    r.number("beta1", c.optimizer.beta1, 0.0, 1.0, true);
    r.number("beta2", c.optimizer.beta2, 0.0, 1.0, true);
    r.number("epsilon", c.optimizer.epsilon, 0.0);
    if (c.max_iterations < c.probe_interval) r.error("max_iterations", "must be >= probe_interval");
  } else if (kind == "pipeline") {
    m.kind = MethodSpec::Kind::pipeline;
    if (auto im = read_imputer_name(r, "imputer", true)) {
      m.imputer.method = *im;
      read_imputer_hyper(r, m.imputer);
    }
    const auto nc = r.text("corrector");
    if (!nc) {
      r.error("corrector", "missing (one of none, sfil, pfil, spol, ppol)");
    } else if (auto c = noise_corrector_from_string(*nc)) {
      m.noise_corrector = *c;
    } else if (imputer_from_string(*nc)) {
      r.error("corrector", "'" + *nc + "' is an imputer; a pipeline pairs one imputer with one corrector");
    } else {
      r.error("corrector", "unknown noise corrector '" + *nc + "' (none, sfil, pfil, spol, ppol)");
    }
    r.number("fraction", m.noisy_fraction, 0.0, 0.5, true);
    if (!(m.noisy_fraction > 0.0)) r.error("fraction", "must be > 0");
    r.number("panda_bins", m.panda.bins, 1.0);
    r.number("polish_depth", m.polish.tree.max_depth, 1.0);
    r.boolean("require_fix", m.polish.require_fix);
  } else {
    r.error("kind", "unknown method kind '" + kind + "' (imputer, corrector, pipeline)");
  }
  cfg.methods.push_back(std::move(m));
}

void read_experiment(const Section& sec, ExperimentConfig& cfg, std::vector<std::string>& errors,
                     const std::filesystem::path& base, bool& rates_given) {
  Reader r(sec, "experiment", errors);
  if (auto v = r.text("kind")) {
    if (auto k = experiment_from_string(*v))
      cfg.kind = *k;
    else
      r.error("kind", "unknown experiment '" + *v + "' (impute, impute-under-noise, pipeline-vs-corrector)");
  } else {
    r.error("kind", "missing");
  }
  if (auto v = r.text("name")) cfg.name = *v;
  if (auto v = r.text("output")) cfg.output_dir = base / *v;
  if (auto v = r.text("seeds")) {
    cfg.seeds.clear();
    if (!trim(*v).empty()) {
      const auto items = split_list(*v);
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (auto s = to_u64(items[i]))
          cfg.seeds.push_back(*s);
        else
          r.error("seeds[" + std::to_string(i) + "]", "'" + items[i] + "' is not a non-negative integer");
      }
    }
    if (cfg.seeds.empty() && v) r.error("seeds", "seed list is empty");
    std::set<std::uint64_t> uniq(cfg.seeds.begin(), cfg.seeds.end());
    if (uniq.size() != cfg.seeds.size()) r.error("seeds", "duplicate seeds");
  }
  if (auto v = r.text("noise_rates")) {
    rates_given = true;
    cfg.noise_rates.clear();
    const auto items = split_list(*v);
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto key = "noise_rates[" + std::to_string(i) + "]";
      if (items[i] == "protocol") {
        cfg.noise_rates.insert(cfg.noise_rates.end(), kProtocolNoiseRates.begin(), kProtocolNoiseRates.end());
      } else if (auto d = to_double(items[i])) {
        if (*d >= 0.0 && *d < 1.0)
          cfg.noise_rates.push_back(*d);
        else
          r.error(key, "rate " + items[i] + " outside [0, 1)");
      } else {
        r.error(key, "'" + items[i] + "' is not a number");
      }
    }
    if (items.empty()) r.error("noise_rates", "rate list is empty");
    std::set<double> uniq(cfg.noise_rates.begin(), cfg.noise_rates.end());
    if (uniq.size() != cfg.noise_rates.size()) r.error("noise_rates", "duplicate rates");
  }
  r.number("workers", cfg.workers, 1.0);
  r.number("eval_folds", cfg.eval_folds, 2.0);
  r.number("tree_max_depth", cfg.eval_tree.max_depth, 1.0);
  r.number("tree_min_leaf", cfg.eval_tree.min_leaf, 1.0);
  r.number("alpha", cfg.alpha, 0.0, 1.0, true);
}

void read_dataset(const Section& sec, ExperimentConfig& cfg, std::vector<std::string>& errors,
                  const std::filesystem::path& base) {
  Reader r(sec, "dataset", errors);
  auto& ds = cfg.dataset;
  if (auto v = r.text("name")) ds.name = *v;
  const auto source = r.text("source").value_or("synthetic");
  if (source == "synthetic") {
    ds.synthetic = true;
    r.number("rows", ds.synth.n_rows, 10.0);
    r.number("continuous", ds.synth.n_continuous, 0.0);
    r.number("categorical", ds.synth.n_categorical, 0.0);
    r.number("missing_rate", ds.synth.missing_rate, 0.0, 1.0, true);
    r.number("seed", ds.synth.seed);
    if (ds.synth.n_continuous + ds.synth.n_categorical == 0) r.error("continuous", "synthetic data needs features");
  } else if (source == "csv") {
    ds.synthetic = false;
    if (auto v = r.text("path"))
      ds.path = base / *v;
    else
      r.error("path", "missing");
    if (auto v = r.text("label"))
      ds.csv.label_column = *v;
    else
      r.error("label", "missing (evaluation needs a binary label column)");
    if (auto v = r.text("positive_label")) ds.csv.positive_label = *v;
    if (auto v = r.text("missing_tokens")) {
      ds.csv.missing_tokens.clear();
      for (const auto& t : split_list(*v, '|')) ds.csv.missing_tokens.insert(t == "<empty>" ? "" : t);
    }
    r.number("max_rows_per_class", ds.csv.max_rows_per_class, 0.0);
  } else {
    r.error("source", "unknown source '" + source + "' (synthetic, csv)");
  }
}

}  // namespace

ConfigResult parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  ConfigResult result;
  auto& errors = result.errors;
  std::vector<Section> sections;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back("line " + std::to_string(line_no) + ": malformed section header");
        continue;
      }
      const std::string inner = trim(line.substr(1, line.size() - 2));
      const auto sp = inner.find_first_of(" \t");
      Section s;
      s.kind = inner.substr(0, sp);
      s.arg = sp == std::string::npos ? "" : trim(inner.substr(sp));
      s.line = line_no;
      sections.push_back(std::move(s));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    if (sections.empty()) {
      errors.push_back("line " + std::to_string(line_no) + ": key outside of any section");
      continue;
    }
    sections.back().entries.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no});
  }

  ExperimentConfig cfg;
  bool rates_given = false;
  bool have_experiment = false;
  bool have_dataset = false;
  std::set<std::string> method_ids;
  for (const auto& sec : sections) {
    if (sec.kind == "experiment") {
      if (have_experiment) errors.push_back("experiment: section repeated");
      have_experiment = true;
      read_experiment(sec, cfg, errors, base_dir, rates_given);
    } else if (sec.kind == "dataset") {
      if (have_dataset) errors.push_back("dataset: section repeated");
      have_dataset = true;
      read_dataset(sec, cfg, errors, base_dir);
    } else if (sec.kind == "schema") {
      for (const auto& e : sec.entries) {
        try {
          cfg.dataset.schema.push_back(parse_schema_entry(e.key, e.value));
        } catch (const DataError& ex) {
          errors.push_back("schema." + e.key + ": " + ex.what());
        }
      }
    } else if (sec.kind == "method") {
      if (!method_ids.insert(sec.arg).second) errors.push_back("method." + sec.arg + ": duplicate method id");
      read_method(sec, cfg, errors);
    } else {
      errors.push_back("line " + std::to_string(sec.line) + ": unknown section [" + sec.kind + "]");
    }
  }

  if (!have_experiment) errors.push_back("experiment: section missing");
  if (!have_dataset) errors.push_back("dataset: section missing");
  if (cfg.methods.empty()) errors.push_back("method: at least one [method <id>] section is required");
  if (cfg.name.empty()) cfg.name = to_string(cfg.kind);

  if (cfg.kind == ExperimentKind::impute) {
    if (rates_given && !(cfg.noise_rates.size() == 1 && cfg.noise_rates[0] == 0.0))
      errors.push_back("experiment.noise_rates: experiment 'impute' requires noise rates = {0}");
    cfg.noise_rates = {0.0};
  } else if (!rates_given) {
    cfg.noise_rates.assign(kProtocolNoiseRates.begin(), kProtocolNoiseRates.end());
  }
  if (cfg.kind == ExperimentKind::pipeline_vs_corrector) {
    const bool any_pipeline = std::any_of(cfg.methods.begin(), cfg.methods.end(),
                                          [](const MethodSpec& m) { return m.kind == MethodSpec::Kind::pipeline; });
    if (!any_pipeline && !cfg.methods.empty())
      errors.push_back("method: experiment 'pipeline-vs-corrector' needs at least one pipeline method");
  }
  if (!cfg.dataset.synthetic && cfg.dataset.schema.empty())
    errors.push_back("schema: csv datasets need a [schema] section");

  result.config = std::move(cfg);
  return result;
}

ConfigResult validate_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    ConfigResult r;
    r.errors.push_back("config: cannot read '" + path.string() + "'");
    return r;
  }
  return parse_config(in, path.parent_path());
}

std::string describe_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[experiment]\n"
     << "kind = " << to_string(c.kind) << "\nname = " << c.name << "\noutput = " << c.output_dir.string()
     << "\nseeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? "," : "") << c.seeds[i];
  os << "\nnoise_rates = ";
  for (std::size_t i = 0; i < c.noise_rates.size(); ++i) os << (i ? "," : "") << c.noise_rates[i];
  os << "\nworkers = " << c.workers << "\neval_folds = " << c.eval_folds << "\ntree_max_depth = " << c.eval_tree.max_depth
     << "\ntree_min_leaf = " << c.eval_tree.min_leaf << "\nalpha = " << c.alpha << "\n\n[dataset]\nname = " << c.dataset.name
     << '\n';
  if (c.dataset.synthetic) {
    const auto& s = c.dataset.synth;
    os << "source = synthetic\nrows = " << s.n_rows << "\ncontinuous = " << s.n_continuous << "\ncategorical = "
       << s.n_categorical << "\nmissing_rate = " << s.missing_rate << "\nseed = " << s.seed << '\n';
  } else {
    os << "source = csv\npath = " << c.dataset.path.string() << "\nlabel = " << c.dataset.csv.label_column.value_or("")
       << "\npositive_label = " << c.dataset.csv.positive_label << '\n';
    os << "\n[schema]\n" << format_schema(c.dataset.schema);
  }
  for (const auto& m : c.methods) os << "\n[method " << m.id << "]\n# " << m.to_json(0) << '\n';
  return os.str();
}

}  // namespace attrnoise
