#include "attrnoise/results.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "attrnoise/tabular.hpp"

namespace attrnoise {

std::string RunRecord::method_kind() const {
  const auto j = nlohmann::json::parse(hyper_json, nullptr, false);
  if (j.is_object() && j.contains("kind") && j["kind"].is_string()) return j["kind"].get<std::string>();
  return {};
}

const char* to_string(Metric m) { return m == Metric::auc ? "auc" : "bal_acc"; }

double metric_value(const RunRecord& r, Metric m) {
  const auto& v = m == Metric::auc ? r.auc : r.balanced_accuracy;
  if (!v) throw std::invalid_argument("run record for '" + r.method + "' has no " + to_string(m));
  return *v;
}

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fixed(double v, int digits) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  return std::string(buf, ptr);
}

std::optional<double> parse_opt_double(const std::string& s, const char* what) {
  if (s.empty()) return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError(std::string("results.csv: bad ") + what + " value '" + s + "'");
  return v;
}

}  // namespace

void write_results_csv(const std::vector<RunRecord>& records, std::ostream& out) {
  out << kResultsHeader << '\n';
  for (const auto& r : records) {
    std::string hyper = r.hyper_json;
    if (r.error) {
      auto j = nlohmann::ordered_json::parse(hyper, nullptr, false);
      if (!j.is_object()) j = nlohmann::ordered_json::object();
      j["error"] = *r.error;
      hyper = j.dump();
    }
    out << csv_escape(r.experiment) << ',' << csv_escape(r.dataset) << ',' << csv_escape(r.method) << ','
        << shortest(r.noise_rate) << ',' << r.seed << ','
        << (r.balanced_accuracy ? shortest(*r.balanced_accuracy) : "") << ',' << (r.auc ? shortest(*r.auc) : "") << ','
        << fixed(r.wall_seconds, 6) << ',' << csv_escape(hyper) << '\n';
  }
}

void write_results_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_results_csv(records, out);
}

std::vector<RunRecord> read_results_csv(std::istream& in) {
  const auto rows = parse_csv(in);
  if (rows.empty()) throw DataError("results.csv: empty file");
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  if (header != kResultsHeader) throw DataError("results.csv: unexpected header '" + header + "'");
  std::vector<RunRecord> out;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& f = rows[k];
    if (f.size() != 9) throw DataError("results.csv: row " + std::to_string(k) + " has " + std::to_string(f.size()) + " fields");
    RunRecord r;
    r.experiment = f[0];
    r.dataset = f[1];
    r.method = f[2];
    r.noise_rate = parse_opt_double(f[3], "noise_rate").value_or(0.0);
    r.seed = static_cast<std::uint64_t>(std::stoull(f[4]));
    r.balanced_accuracy = parse_opt_double(f[5], "bal_acc");
    r.auc = parse_opt_double(f[6], "auc");
    r.wall_seconds = parse_opt_double(f[7], "wall_s").value_or(0.0);
    r.hyper_json = f[8];
    const auto j = nlohmann::json::parse(r.hyper_json, nullptr, false);
    if (j.is_object() && j.contains("error") && j["error"].is_string()) r.error = j["error"].get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RunRecord> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  return read_results_csv(in);
}

SignificanceMark mark_significance(const std::vector<RunRecord>& ours, const std::vector<RunRecord>& theirs,
                                   Metric metric, double alpha) {
  if (ours.empty() || ours.size() != theirs.size())
    throw std::invalid_argument("mark_significance: run counts differ (" + std::to_string(ours.size()) + " vs " +
                                std::to_string(theirs.size()) + ")");
  const auto& ref = ours.front();
  auto same_cell = [&](const RunRecord& r) {
    return r.experiment == ref.experiment && r.dataset == ref.dataset && r.noise_rate == ref.noise_rate;
  };
  std::vector<double> a, b;
  for (const auto& r : ours) {
    if (!same_cell(r)) throw std::invalid_argument("mark_significance: mismatched experimental cells");
    a.push_back(metric_value(r, metric));
  }
  for (const auto& r : theirs) {
    if (!same_cell(r)) throw std::invalid_argument("mark_significance: mismatched experimental cells");
    b.push_back(metric_value(r, metric));
  }
  return mark_significance(a, b, alpha);
}

std::string render_summary(const std::vector<RunRecord>& records, double alpha) {
  using Key = std::pair<std::string, std::string>;  // experiment, dataset
  std::vector<Key> groups;
  for (const auto& r : records) {
    Key k{r.experiment, r.dataset};
    if (std::find(groups.begin(), groups.end(), k) == groups.end()) groups.push_back(k);
  }

  std::ostringstream os;
  os << "# Results summary\n\n"
     << "Cells show mean ± sample std over seeds. Marks compare the reference corrector against each other method "
     << "with a two-sided Welch t-test at p = " << shortest(alpha)
     << ": • reference significantly better, ≡ even, ◦ reference significantly worse.\n";

  for (const auto& [experiment, dataset] : groups) {
    std::vector<std::string> methods;
    std::vector<double> rates;
    std::string reference;
    std::map<std::pair<std::string, double>, std::vector<RunRecord>> cells;
    std::vector<const RunRecord*> failures;
    for (const auto& r : records) {
      if (r.experiment != experiment || r.dataset != dataset) continue;
      if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
      if (std::find(rates.begin(), rates.end(), r.noise_rate) == rates.end()) rates.push_back(r.noise_rate);
      if (reference.empty() && r.method_kind() == "corrector") reference = r.method;
      if (r.ok())
        cells[{r.method, r.noise_rate}].push_back(r);
      else
        failures.push_back(&r);
    }
    std::sort(rates.begin(), rates.end());

    os << "\n## " << experiment << " / " << dataset << "\n\n";
    os << "Reference method: " << (reference.empty() ? "none (no corrector runs)" : reference) << "\n";
    for (Metric metric : {Metric::auc, Metric::balanced_accuracy}) {
      os << "\n### " << (metric == Metric::auc ? "AUC" : "Balanced accuracy") << "\n\n| method |";
      for (double rate : rates) os << " noise " << shortest(rate) << " |";
      os << "\n|---|";
      for (std::size_t i = 0; i < rates.size(); ++i) os << "---|";
      os << '\n';
      for (const auto& m : methods) {
        os << "| " << m << " |";
        for (double rate : rates) {
          const auto it = cells.find({m, rate});
          if (it == cells.end()) {
            os << " n/a |";
            continue;
          }
          std::vector<double> v;
          for (const auto& r : it->second) v.push_back(metric_value(r, metric));
          double mean = 0.0;
          for (double x : v) mean += x;
          mean /= double(v.size());
          double ss = 0.0;
          for (double x : v) ss += (x - mean) * (x - mean);
          const double sd = v.size() > 1 ? std::sqrt(ss / double(v.size() - 1)) : 0.0;
          os << ' ' << fixed(mean, 6) << " ± " << fixed(sd, 6);
          if (!reference.empty() && m != reference) {
            const auto ref = cells.find({reference, rate});
            if (ref != cells.end() && ref->second.size() == it->second.size() && v.size() >= 2)
              os << ' ' << mark_symbol(mark_significance(ref->second, it->second, metric, alpha).mark);
            else
              os << " (n/a)";
          }
          os << " |";
        }
        os << '\n';
      }
    }
    if (!failures.empty()) {
      os << "\n### Failed cells\n\n| method | noise | seed | error |\n|---|---|---|---|\n";
      for (const auto* r : failures)
        os << "| " << r->method << " | " << shortest(r->noise_rate) << " | " << r->seed << " | " << *r->error << " |\n";
    }
  }
  return os.str();
}

}  // namespace attrnoise
