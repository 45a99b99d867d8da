#include "attrnoise/tabular.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace attrnoise {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  char ch = 0;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  while (in.get(ch)) {
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (!field_started || trim(field).empty()) {
          field.clear();
          in_quotes = true;
          field_started = true;
        } else {
          field.push_back(ch);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(ch);
        field_started = true;
    }
  }
  if (in_quotes) throw DataError("unterminated quoted field in CSV");
  if (!field.empty() || !record.empty()) end_record();
  return records;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

Dataset load_csv(const std::filesystem::path& path, const std::vector<FeatureSpec>& schema,
                 const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file '" + path.string() + "'");
  return load_csv(in, schema, options);
}

Dataset load_csv(std::istream& in, const std::vector<FeatureSpec>& schema, const CsvOptions& options) {
  const auto records = parse_csv(in);
  if (records.empty()) throw DataError("CSV has no header row");

  std::vector<std::string> header;
  for (const auto& h : records.front()) header.push_back(trim(h));
  std::map<std::string, std::size_t> header_index;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (!header_index.emplace(header[c], c).second)
      throw DataError("duplicate header name '" + header[c] + "'");

  std::optional<std::size_t> label_col;
  if (options.label_column) {
    auto it = header_index.find(*options.label_column);
    if (it == header_index.end())
      throw DataError("label column '" + *options.label_column + "' not in header");
    label_col = it->second;
  }

  std::vector<std::size_t> source_col;
  for (const auto& s : schema) {
    auto it = header_index.find(s.name);
    if (it == header_index.end()) throw DataError("schema feature '" + s.name + "' not in header");
    source_col.push_back(it->second);
  }
  const std::size_t expected = schema.size() + (label_col ? 1 : 0);
  if (header.size() != expected)
    throw DataError("header has " + std::to_string(header.size()) + " columns, schema expects " +
                    std::to_string(expected));

  std::vector<std::size_t> keep;
  Labels labels;
  std::size_t per_class[2] = {0, 0};
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size())
      throw DataError("row " + std::to_string(r) + " has " + std::to_string(rec.size()) +
                      " fields, expected " + std::to_string(header.size()));
    if (label_col) {
      const std::string tok = trim(rec[*label_col]);
      if (options.missing_tokens.count(tok))
        throw DataError("row " + std::to_string(r) + ": missing label");
      const int y = tok == options.positive_label ? 1 : 0;
      if (options.max_rows_per_class && per_class[y] >= options.max_rows_per_class) continue;
      ++per_class[y];
      labels.push_back(y);
    }
    keep.push_back(r);
  }

  Dataset ds(schema, keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const auto& rec = records[keep[i]];
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const std::string tok = trim(rec[source_col[j]]);
      if (options.missing_tokens.count(tok)) continue;
      const auto where = "row " + std::to_string(keep[i]) + ", column '" + schema[j].name + "'";
      if (schema[j].is_categorical()) {
        const auto idx = schema[j].category_index(tok);
        if (!idx) throw DataError("unknown category '" + tok + "' at " + where);
        ds.set(i, j, static_cast<double>(*idx));
      } else {
        const auto v = parse_double(tok);
        if (!v) throw DataError("unparseable numeric value '" + tok + "' at " + where);
        ds.set(i, j, *v);
      }
    }
  }
  if (label_col) ds.set_labels(std::move(labels));
  ds.refresh_observed_ranges();
  return ds;
}

void write_csv(const Dataset& ds, std::ostream& out, const std::string& label_name) {
  const auto& specs = ds.specs();
  for (std::size_t j = 0; j < specs.size(); ++j) out << (j ? "," : "") << csv_escape(specs[j].name);
  if (ds.labels()) out << ',' << csv_escape(label_name);
  out << '\n';
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    for (std::size_t j = 0; j < specs.size(); ++j) {
      if (j) out << ',';
      const auto& v = ds.at(i, j);
      if (!v) continue;
      if (specs[j].is_categorical())
        out << csv_escape(specs[j].categories[static_cast<std::size_t>(*v)]);
      else
        out << format_double(*v);
    }
    if (ds.labels()) out << ',' << (*ds.labels())[i];
    out << '\n';
  }
}

void write_csv(const Dataset& ds, const std::filesystem::path& path, const std::string& label_name) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write CSV file '" + path.string() + "'");
  write_csv(ds, out, label_name);
}

FeatureSpec parse_schema_entry(const std::string& name, const std::string& value) {
  const std::string v = trim(value);
  if (v == "continuous") return FeatureSpec::continuous(trim(name));
  const std::string prefix = "categorical:";
  if (v.rfind(prefix, 0) == 0) {
    std::vector<std::string> cats;
    std::stringstream ss(v.substr(prefix.size()));
    std::string cat;
    while (std::getline(ss, cat, '|')) cats.push_back(trim(cat));
    auto spec = FeatureSpec::categorical(trim(name), std::move(cats));
    spec.validate();
    return spec;
  }
  throw DataError("schema entry for '" + name + "' must be 'continuous' or 'categorical: a|b|...'");
}

std::vector<FeatureSpec> parse_schema(std::istream& in) {
  std::vector<FeatureSpec> specs;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw DataError("schema line without '=': " + t);
    specs.push_back(parse_schema_entry(t.substr(0, eq), t.substr(eq + 1)));
  }
  return specs;
}

std::string format_schema(const std::vector<FeatureSpec>& specs) {
  std::string out;
  for (const auto& s : specs) {
    out += s.name + " = ";
    if (s.is_categorical()) {
      out += "categorical: ";
      for (std::size_t c = 0; c < s.categories.size(); ++c) out += (c ? "|" : "") + s.categories[c];
    } else {
      out += "continuous";
    }
    out += '\n';
  }
  return out;
}

}  // namespace attrnoise
