#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace attrnoise {

/// Raised for malformed input data: bad CSV cells, schema mismatches,
/// unknown categories. Messages name the offending row/column.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FeatureKind { continuous, categorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  std::vector<std::string> categories;  // categorical only
  double observed_min = 0.0;            // continuous only
  double observed_max = 0.0;

  static FeatureSpec continuous(std::string name);
  static FeatureSpec categorical(std::string name, std::vector<std::string> categories);

  bool is_categorical() const { return kind == FeatureKind::categorical; }
  std::size_t encoded_width() const { return is_categorical() ? categories.size() : 1; }
  /// Index of `label` among the categories, or nullopt.
  std::optional<std::size_t> category_index(const std::string& label) const;
  void validate() const;
  bool operator==(const FeatureSpec&) const = default;
};

using Labels = std::vector<int>;

/// Mixed-type table. Continuous cells hold the raw value; categorical cells
/// hold the category index. A missing cell is an empty optional.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<FeatureSpec> specs, std::size_t n_rows);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_features() const { return specs_.size(); }
  const std::vector<FeatureSpec>& specs() const { return specs_; }
  const FeatureSpec& spec(std::size_t j) const { return specs_.at(j); }

  const std::optional<double>& at(std::size_t i, std::size_t j) const {
    return cells_[i * specs_.size() + j];
  }
  bool observed(std::size_t i, std::size_t j) const { return at(i, j).has_value(); }
  void set(std::size_t i, std::size_t j, std::optional<double> value);

  const std::optional<Labels>& labels() const { return labels_; }
  /// Labels must be 0/1 with both classes present.
  void set_labels(Labels labels);
  void clear_labels() { labels_.reset(); }

  /// Recompute observed_min/observed_max of continuous specs from the cells.
  void refresh_observed_ranges();
  /// Replace the specs wholesale (same kinds and category lists required).
  void adopt_specs(const std::vector<FeatureSpec>& specs);

  std::size_t missing_count() const;
  bool complete() const { return missing_count() == 0; }
  /// New dataset holding only `rows`, in the given order.
  Dataset select_rows(const std::vector<std::size_t>& rows) const;

  bool operator==(const Dataset& other) const = default;

 private:
  std::size_t n_rows_ = 0;
  std::vector<FeatureSpec> specs_;
  std::vector<std::optional<double>> cells_;
  std::optional<Labels> labels_;
};

/// Maps one source feature to its block of encoded columns.
struct ColumnGroup {
  std::size_t feature = 0;
  std::size_t first = 0;
  std::size_t width = 1;
};

std::vector<ColumnGroup> column_groups(const std::vector<FeatureSpec>& specs);
std::size_t encoded_width(const std::vector<FeatureSpec>& specs);

inline constexpr double kMissingPlaceholder = 0.5;

/// Numeric [0,1] view of a Dataset. `mask` is 1 where the source cell was
/// observed; masked-out entries of `values` hold kMissingPlaceholder.
struct EncodedMatrix {
  Eigen::MatrixXd values;
  Eigen::MatrixXd mask;
  std::vector<FeatureSpec> specs;
  std::vector<ColumnGroup> groups;
  std::vector<std::size_t> column_feature;  // encoded column -> feature index
  std::vector<std::string> warnings;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

/// Min-max scale continuous features with the ranges stored in the dataset's
/// specs, one-hot categorical ones. Values are clamped into [0,1].
EncodedMatrix encode(const Dataset& ds);

/// Inverse of encode for a complete matrix: continuous columns are inverse
/// scaled, one-hot groups decoded by argmax (lowest index wins ties).
Dataset decode(const Eigen::MatrixXd& values, const std::vector<FeatureSpec>& specs);
inline Dataset decode(const EncodedMatrix& m) { return decode(m.values, m.specs); }

/// decode followed by encode: snaps one-hot groups to a single 1 and clamps
/// continuous values. This is the matrix the downstream classifier sees.
Eigen::MatrixXd snap(const Eigen::MatrixXd& values, const std::vector<FeatureSpec>& specs);

struct SyntheticParams {
  std::size_t n_rows = 1000;
  std::size_t n_continuous = 25;
  std::size_t n_categorical = 5;
  double missing_rate = 0.2;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Dataset data;
  Dataset truth;  // pre-masking values, same specs as data
};

/// Mixed-type data driven by three latent factors; labels are a linear
/// threshold on the latents; cells are removed MCAR at missing_rate.
SyntheticData synth_generate(const SyntheticParams& params);

// CSV ------------------------------------------------------------------------

struct CsvOptions {
  std::set<std::string> missing_tokens{"", "?", "NA"};
  std::optional<std::string> label_column;
  std::string positive_label = "1";
  /// Keep at most this many rows per label class (first come); 0 = no cap.
  std::size_t max_rows_per_class = 0;
};

/// RFC-4180 record splitter; handles quoted fields with embedded commas,
/// doubled quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(std::istream& in);
std::string csv_escape(const std::string& field);

Dataset load_csv(const std::filesystem::path& path, const std::vector<FeatureSpec>& schema,
                 const CsvOptions& options = {});
Dataset load_csv(std::istream& in, const std::vector<FeatureSpec>& schema,
                 const CsvOptions& options = {});

/// Writes features (and a trailing `label` column when labels exist).
/// Missing cells are written as empty fields.
void write_csv(const Dataset& ds, std::ostream& out, const std::string& label_name = "label");
void write_csv(const Dataset& ds, const std::filesystem::path& path,
               const std::string& label_name = "label");

/// Schema entry value: `continuous` or `categorical: a|b|c`.
FeatureSpec parse_schema_entry(const std::string& name, const std::string& value);
/// One `name = <entry>` per line; blank lines and `#` comments skipped.
std::vector<FeatureSpec> parse_schema(std::istream& in);
std::string format_schema(const std::vector<FeatureSpec>& specs);

}  // namespace attrnoise
