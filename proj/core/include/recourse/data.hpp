#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "recourse/autodiff.hpp"
#include "recourse/csv.hpp"
#include "recourse/matrix.hpp"

namespace recourse::data {

enum class ColumnKind { kContinuous, kCategorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
};

// Contents of a dataset's schema.json: which columns are features, which one
// is the label, and optionally which one names the subset a row belongs to.
struct DatasetSpec {
  std::vector<ColumnSpec> columns;
  std::string label;
  std::optional<std::string> subset_column;
};

DatasetSpec parse_dataset_spec(const std::string& json_text);
std::string dataset_spec_json(const DatasetSpec& spec);

// One fitted feature column and the slots it occupies in the encoded vector.
struct FeatureColumn {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
  double min = 0.0;  // continuous only
  double max = 0.0;
  std::vector<std::string> categories;  // categorical only, lexicographic
  ad::ColumnSpan span;
};

// Fitted encoding from raw rows to [0,1]^encoded_dim. Continuous columns take
// one slot each; categorical columns take one one-hot slot per category.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<FeatureColumn> columns);

  const std::vector<FeatureColumn>& columns() const { return columns_; }
  std::size_t encoded_dim() const { return encoded_dim_; }

  // Spans of the categorical groups, in column order.
  const std::vector<ad::ColumnSpan>& group_spans() const { return group_spans_; }
  // 1 at continuous slots, 0 at categorical slots; shape [1, encoded_dim].
  const Matrix& continuous_mask() const { return continuous_mask_; }

  bool operator==(const FeatureSchema& other) const;

 private:
  std::vector<FeatureColumn> columns_;
  std::size_t encoded_dim_ = 0;
  std::vector<ad::ColumnSpan> group_spans_;
  Matrix continuous_mask_;
};

std::string schema_json(const FeatureSchema& schema);
FeatureSchema parse_schema_json(const std::string& text);
// FNV-1a over the canonical JSON form.
std::uint64_t schema_hash(const FeatureSchema& schema);

// Fits ranges and category sets from the given rows of `table` (all rows when
// `rows` is empty).
FeatureSchema fit_schema(const RawTable& table, const std::vector<ColumnSpec>& columns,
                         const std::vector<std::size_t>& rows = {});

Matrix transform(const RawTable& table, const FeatureSchema& schema, const std::vector<std::size_t>& rows = {});
// Decodes feature columns back to strings (continuous via the fitted range,
// categorical via argmax within the group).
std::vector<std::vector<std::string>> inverse_transform(const Matrix& encoded, const FeatureSchema& schema);

// Rounds each categorical group to a one-hot argmax; continuous slots untouched.
Matrix harden(const Matrix& encoded, const FeatureSchema& schema);

std::vector<double> parse_labels(const RawTable& table, const std::string& label,
                                 const std::vector<std::size_t>& rows = {});

struct Subset {
  std::string key;
  Matrix x_train;
  std::vector<double> y_train;
  Matrix x_test;
  std::vector<double> y_test;
  // Row indices into the source table.
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

struct ShiftedDataset {
  FeatureSchema schema;
  std::vector<Subset> subsets;

  std::size_t k() const { return subsets.size(); }
};

// Contiguous half-open row ranges, one per subset.
using RowRanges = std::vector<std::pair<std::size_t, std::size_t>>;

// Splits each subset (keyed by `spec.subset_column`) into stratified train and
// test parts, fits the schema on the union of train parts and encodes all rows.
ShiftedDataset partition_subsets(const RawTable& table, const DatasetSpec& spec, double test_fraction,
                                 std::uint64_t seed);
ShiftedDataset partition_subsets(const RawTable& table, const DatasetSpec& spec, const RowRanges& ranges,
                                 double test_fraction, std::uint64_t seed);

struct MoonsOptions {
  std::size_t k = 3;
  std::size_t n = 400;  // rows per subset
  double rotation_deg = 0.0;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

// Two interleaved crescents per subset; subset i (0-based) rotated by
// i * rotation_deg about the origin. Columns x1, x2, label, subset.
RawTable synth_moons_table(const MoonsOptions& options);
DatasetSpec moons_spec();
ShiftedDataset synth_shifted_moons(const MoonsOptions& options, double test_fraction = 0.2);

// Dataset directory: schema.json plus one or more *.csv files. With a subset
// column the files are concatenated and split by it; otherwise each file (in
// name order) is one subset.
ShiftedDataset load_dataset_dir(const std::string& dir, double test_fraction, std::uint64_t seed);
// Writes one CSV per subset (subset_<i>.csv) and schema.json.
void write_moons_dir(const std::string& dir, const MoonsOptions& options);

// Train rows of the listed subsets stacked together.
std::pair<Matrix, std::vector<double>> stack_train(const ShiftedDataset& ds, const std::vector<std::size_t>& which);
std::pair<Matrix, std::vector<double>> stack_test(const ShiftedDataset& ds, const std::vector<std::size_t>& which);

}  // namespace recourse::data
