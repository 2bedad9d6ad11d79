#include "recourse/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"
#include "recourse/errors.hpp"
#include "recourse/random.hpp"

namespace recourse::data {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string_view kind_name(ColumnKind k) { return k == ColumnKind::kContinuous ? "continuous" : "categorical"; }

ColumnKind parse_kind(const std::string& s) {
  if (s == "continuous") return ColumnKind::kContinuous;
  if (s == "categorical") return ColumnKind::kCategorical;
  throw DataError("unknown column kind '" + s + "' (expected continuous or categorical)");
}

std::optional<double> to_number(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  if (first == last) return std::nullopt;
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

std::vector<std::size_t> all_rows(const RawTable& table, const std::vector<std::size_t>& rows) {
  if (!rows.empty()) return rows;
  std::vector<std::size_t> out(table.rows.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

const std::string& cell(const RawTable& table, std::size_t row, std::size_t col, const std::string& name) {
  const std::string& v = table.rows[row][col];
  if (v.empty() || v == "NA" || v == "NaN" || v == "nan") {
    throw DataError("missing value in column '" + name + "' at data row " + std::to_string(row + 1));
  }
  return v;
}

double continuous_cell(const RawTable& table, std::size_t row, std::size_t col, const std::string& name) {
  const std::string& v = cell(table, row, col, name);
  auto num = to_number(v);
  if (!num || !std::isfinite(*num)) {
    throw DataError("non-numeric value '" + v + "' in continuous column '" + name + "' at data row " +
                    std::to_string(row + 1));
  }
  return *num;
}

// Natural order: digit runs compare numerically.
bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      std::string_view da(a.data() + i, ie - i), db(b.data() + j, je - j);
      while (da.size() > 1 && da.front() == '0') da.remove_prefix(1);
      while (db.size() > 1 && db.front() == '0') db.remove_prefix(1);
      if (da.size() != db.size()) return da.size() < db.size();
      if (da != db) return da < db;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

// Stratified split of `rows` into (train, test). The number of test rows is
// round(fraction * n), allocated across classes by largest remainder.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<std::size_t>& rows, const std::vector<double>& labels, double fraction, Rng& rng,
    const std::string& key) {
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < rows.size(); ++i) by_class[labels[i] > 0.5 ? 1 : 0].push_back(rows[i]);

  const auto n_test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
  if (n_test == 0 || n_test >= rows.size()) {
    throw DataError("subset '" + key + "': test fraction " + format_double(fraction) + " leaves an empty " +
                    (n_test == 0 ? "test" : "train") + " split");
  }
  std::size_t quota[2];
  double remainder[2];
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double exact = fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  while (assigned < n_test) {
    int c = remainder[1] > remainder[0] ? 1 : 0;
    if (quota[c] >= by_class[c].size()) c = 1 - c;
    ++quota[c];
    remainder[c] = -1.0;
    ++assigned;
  }
  while (assigned > n_test) {
    int c = quota[1] > quota[0] ? 1 : 0;
    --quota[c];
    --assigned;
  }

  std::vector<std::size_t> train, test;
  for (int c = 0; c < 2; ++c) {
    auto& rs = by_class[c];
    shuffle(rs, rng);
    for (std::size_t i = 0; i < rs.size(); ++i) (i < quota[c] ? test : train).push_back(rs[i]);
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

}  // namespace

// ---- DatasetSpec ------------------------------------------------------------

DatasetSpec parse_dataset_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("schema file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("schema file must contain a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "columns" && it.key() != "label" && it.key() != "subset_column")
      throw DataError("schema file: unknown key '" + it.key() + "'");
  }
  if (!j.contains("columns") || !j["columns"].is_array()) throw DataError("schema file: 'columns' array required");
  if (!j.contains("label") || !j["label"].is_string()) throw DataError("schema file: 'label' string required");
  DatasetSpec spec;
  for (const auto& c : j["columns"]) {
    if (!c.is_object() || !c.contains("name") || !c.contains("kind"))
      throw DataError("schema file: each column needs 'name' and 'kind'");
    spec.columns.push_back({c["name"].get<std::string>(), parse_kind(c["kind"].get<std::string>())});
  }
  spec.label = j["label"].get<std::string>();
  if (j.contains("subset_column") && !j["subset_column"].is_null())
    spec.subset_column = j["subset_column"].get<std::string>();
  return spec;
}

std::string dataset_spec_json(const DatasetSpec& spec) {
  json cols = json::array();
  for (const auto& c : spec.columns) cols.push_back({{"name", c.name}, {"kind", kind_name(c.kind)}});
  json j = {{"columns", cols}, {"label", spec.label}};
  j["subset_column"] = spec.subset_column ? json(*spec.subset_column) : json(nullptr);
  return j.dump(2) + "\n";
}

// ---- FeatureSchema ------------------------------------------------------------

FeatureSchema::FeatureSchema(std::vector<FeatureColumn> columns) : columns_(std::move(columns)) {
  std::size_t at = 0;
  for (auto& c : columns_) {
    const std::size_t width = c.kind == ColumnKind::kContinuous ? 1 : c.categories.size();
    c.span = {at, width};
    at += width;
    if (c.kind == ColumnKind::kCategorical) group_spans_.push_back(c.span);
  }
  encoded_dim_ = at;
  continuous_mask_ = Matrix(1, encoded_dim_, 0.0);
  for (const auto& c : columns_)
    if (c.kind == ColumnKind::kContinuous) continuous_mask_(0, c.span.start) = 1.0;
}

bool FeatureSchema::operator==(const FeatureSchema& other) const {
  if (columns_.size() != other.columns_.size()) return false;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const auto& a = columns_[i];
    const auto& b = other.columns_[i];
    if (a.name != b.name || a.kind != b.kind || a.min != b.min || a.max != b.max || a.categories != b.categories ||
        a.span != b.span)
      return false;
  }
  return true;
}

std::string schema_json(const FeatureSchema& schema) {
  json cols = json::array();
  for (const auto& c : schema.columns()) {
    json jc = {{"name", c.name}, {"kind", kind_name(c.kind)}, {"start", c.span.start}, {"length", c.span.length}};
    if (c.kind == ColumnKind::kContinuous) {
      jc["min"] = c.min;
      jc["max"] = c.max;
    } else {
      jc["categories"] = c.categories;
    }
    cols.push_back(std::move(jc));
  }
  return json{{"columns", cols}, {"encoded_dim", schema.encoded_dim()}}.dump();
}

FeatureSchema parse_schema_json(const std::string& text) {
  json j = json::parse(text);
  std::vector<FeatureColumn> cols;
  for (const auto& jc : j.at("columns")) {
    FeatureColumn c;
    c.name = jc.at("name").get<std::string>();
    c.kind = parse_kind(jc.at("kind").get<std::string>());
    if (c.kind == ColumnKind::kContinuous) {
      c.min = jc.at("min").get<double>();
      c.max = jc.at("max").get<double>();
    } else {
      c.categories = jc.at("categories").get<std::vector<std::string>>();
    }
    cols.push_back(std::move(c));
  }
  FeatureSchema schema(std::move(cols));
  if (schema.encoded_dim() != j.at("encoded_dim").get<std::size_t>())
    throw DataError("fitted schema: encoded_dim does not match its columns");
  return schema;
}

std::uint64_t schema_hash(const FeatureSchema& schema) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : schema_json(schema)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

FeatureSchema fit_schema(const RawTable& table, const std::vector<ColumnSpec>& columns,
                         const std::vector<std::size_t>& rows_in) {
  if (table.rows.empty()) throw DataError("cannot fit a schema on an empty table");
  if (columns.empty()) throw DataError("no feature columns declared");
  const auto rows = all_rows(table, rows_in);
  std::vector<FeatureColumn> fitted;
  for (const auto& spec : columns) {
    auto idx = table.column_index(spec.name);
    if (!idx) throw DataError("unknown column '" + spec.name + "': not present in CSV header");
    FeatureColumn c;
    c.name = spec.name;
    c.kind = spec.kind;
    if (spec.kind == ColumnKind::kContinuous) {
      c.min = std::numeric_limits<double>::infinity();
      c.max = -std::numeric_limits<double>::infinity();
      for (auto r : rows) {
        const double v = continuous_cell(table, r, *idx, spec.name);
        c.min = std::min(c.min, v);
        c.max = std::max(c.max, v);
      }
      if (rows.empty()) c.min = c.max = 0.0;
    } else {
      std::set<std::string> values;
      for (auto r : rows) values.insert(cell(table, r, *idx, spec.name));
      if (values.empty()) throw DataError("categorical column '" + spec.name + "' has an empty domain");
      c.categories.assign(values.begin(), values.end());
    }
    fitted.push_back(std::move(c));
  }
  return FeatureSchema(std::move(fitted));
}

Matrix transform(const RawTable& table, const FeatureSchema& schema, const std::vector<std::size_t>& rows_in) {
  const auto rows = all_rows(table, rows_in);
  Matrix out(rows.size(), schema.encoded_dim(), 0.0);
  for (const auto& c : schema.columns()) {
    const std::size_t idx = table.require_column(c.name);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (c.kind == ColumnKind::kContinuous) {
        const double v = continuous_cell(table, rows[i], idx, c.name);
        const double range = c.max - c.min;
        out(i, c.span.start) = range > 0.0 ? std::clamp((v - c.min) / range, 0.0, 1.0) : 0.0;
      } else {
        const std::string& v = cell(table, rows[i], idx, c.name);
        auto it = std::lower_bound(c.categories.begin(), c.categories.end(), v);
        if (it == c.categories.end() || *it != v)
          throw DataError("unseen category '" + v + "' in column '" + c.name + "'");
        out(i, c.span.start + static_cast<std::size_t>(it - c.categories.begin())) = 1.0;
      }
    }
  }
  return out;
}

std::vector<std::vector<std::string>> inverse_transform(const Matrix& encoded, const FeatureSchema& schema) {
  if (encoded.cols != schema.encoded_dim())
    throw DataError("inverse_transform: expected " + std::to_string(schema.encoded_dim()) + " columns, got " +
                    std::to_string(encoded.cols));
  std::vector<std::vector<std::string>> out(encoded.rows);
  for (std::size_t i = 0; i < encoded.rows; ++i) {
    for (const auto& c : schema.columns()) {
      if (c.kind == ColumnKind::kContinuous) {
        out[i].push_back(format_double(c.min + encoded(i, c.span.start) * (c.max - c.min)));
      } else {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c.span.length; ++j)
          if (encoded(i, c.span.start + j) > encoded(i, c.span.start + best)) best = j;
        out[i].push_back(c.categories[best]);
      }
    }
  }
  return out;
}

Matrix harden(const Matrix& encoded, const FeatureSchema& schema) {
  Matrix out = encoded;
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (const auto& s : schema.group_spans()) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < s.length; ++j)
        if (out(i, s.start + j) > out(i, s.start + best)) best = j;
      for (std::size_t j = 0; j < s.length; ++j) out(i, s.start + j) = j == best ? 1.0 : 0.0;
    }
  }
  return out;
}

std::vector<double> parse_labels(const RawTable& table, const std::string& label,
                                 const std::vector<std::size_t>& rows_in) {
  auto idx = table.column_index(label);
  if (!idx) throw DataError("label column '" + label + "' not found in CSV header");
  const auto rows = all_rows(table, rows_in);
  std::vector<double> y;
  y.reserve(rows.size());
  for (auto r : rows) {
    const std::string& v = cell(table, r, *idx, label);
    auto num = to_number(v);
    if (!num || (*num != 0.0 && *num != 1.0))
      throw DataError("label column '" + label + "' must be binary 0/1, found '" + v + "' at data row " +
                      std::to_string(r + 1));
    y.push_back(*num);
  }
  return y;
}

// ---- partitioning ---------------------------------------------------------------

namespace {

ShiftedDataset build_from_groups(const RawTable& table, const DatasetSpec& spec,
                                 const std::vector<std::pair<std::string, std::vector<std::size_t>>>& groups,
                                 double test_fraction, std::uint64_t seed) {
  if (groups.size() < 2) throw DataError("need at least 2 subsets, found " + std::to_string(groups.size()));
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw DataError("test fraction must lie strictly between 0 and 1, got " + format_double(test_fraction));
  table.require_column(spec.label);
  for (const auto& c : spec.columns) {
    if (!table.column_index(c.name)) throw DataError("unknown column '" + c.name + "': not present in CSV header");
  }

  ShiftedDataset ds;
  std::vector<std::size_t> all_train;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& [key, rows] = groups[g];
    if (rows.size() < 10)
      throw DataError("subset '" + key + "' has " + std::to_string(rows.size()) + " rows; at least 10 are required");
    auto labels = parse_labels(table, spec.label, rows);
    Rng rng(derive_seed(derive_seed(seed, stream::kSplit), g));
    auto [train, test] = stratified_split(rows, labels, test_fraction, rng, key);
    Subset s;
    s.key = key;
    s.train_rows = std::move(train);
    s.test_rows = std::move(test);
    all_train.insert(all_train.end(), s.train_rows.begin(), s.train_rows.end());
    ds.subsets.push_back(std::move(s));
  }
  std::sort(all_train.begin(), all_train.end());
  ds.schema = fit_schema(table, spec.columns, all_train);
  for (auto& s : ds.subsets) {
    s.x_train = transform(table, ds.schema, s.train_rows);
    s.y_train = parse_labels(table, spec.label, s.train_rows);
    s.x_test = transform(table, ds.schema, s.test_rows);
    s.y_test = parse_labels(table, spec.label, s.test_rows);
  }
  return ds;
}

}  // namespace

ShiftedDataset partition_subsets(const RawTable& table, const DatasetSpec& spec, double test_fraction,
                                 std::uint64_t seed) {
  if (!spec.subset_column) throw DataError("partition_subsets: no subset column configured");
  const std::size_t col = table.require_column(*spec.subset_column);
  std::map<std::string, std::vector<std::size_t>> by_key;
  for (std::size_t r = 0; r < table.rows.size(); ++r) by_key[cell(table, r, col, *spec.subset_column)].push_back(r);

  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups(by_key.begin(), by_key.end());
  const bool numeric =
      std::all_of(groups.begin(), groups.end(), [](const auto& g) { return to_number(g.first).has_value(); });
  if (numeric) {
    std::stable_sort(groups.begin(), groups.end(),
                     [](const auto& a, const auto& b) { return *to_number(a.first) < *to_number(b.first); });
  }
  return build_from_groups(table, spec, groups, test_fraction, seed);
}

ShiftedDataset partition_subsets(const RawTable& table, const DatasetSpec& spec, const RowRanges& ranges,
                                 double test_fraction, std::uint64_t seed) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  std::vector<bool> used(table.rows.size(), false);
  for (std::size_t g = 0; g < ranges.size(); ++g) {
    const auto [begin, end] = ranges[g];
    if (begin > end || end > table.rows.size()) throw DataError("row range " + std::to_string(g) + " is out of bounds");
    std::vector<std::size_t> rows;
    for (std::size_t r = begin; r < end; ++r) {
      if (used[r]) throw DataError("row ranges overlap at row " + std::to_string(r));
      used[r] = true;
      rows.push_back(r);
    }
    groups.emplace_back(std::to_string(g + 1), std::move(rows));
  }
  return build_from_groups(table, spec, groups, test_fraction, seed);
}

// ---- synthetic moons -----------------------------------------------------------

RawTable synth_moons_table(const MoonsOptions& options) {
  RawTable t;
  t.header = {"x1", "x2", "label", "subset"};
  Rng rng(derive_seed(options.seed, stream::kSynth));
  for (std::size_t s = 0; s < options.k; ++s) {
    const double angle = static_cast<double>(s) * options.rotation_deg * std::numbers::pi / 180.0;
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (std::size_t i = 0; i < options.n; ++i) {
      const int label = i < options.n / 2 ? 0 : 1;
      const double t_param = uniform(rng, 0.0, std::numbers::pi);
      double x = label == 0 ? std::cos(t_param) : 1.0 - std::cos(t_param);
      double y = label == 0 ? std::sin(t_param) : 0.5 - std::sin(t_param);
      x += options.noise * normal(rng);
      y += options.noise * normal(rng);
      const double rx = ca * x - sa * y;
      const double ry = sa * x + ca * y;
      t.rows.push_back({format_double(rx), format_double(ry), std::to_string(label), std::to_string(s + 1)});
    }
  }
  return t;
}

DatasetSpec moons_spec() {
  return DatasetSpec{{{"x1", ColumnKind::kContinuous}, {"x2", ColumnKind::kContinuous}}, "label", "subset"};
}

ShiftedDataset synth_shifted_moons(const MoonsOptions& options, double test_fraction) {
  if (options.k < 2) throw DataError("synthetic moons: k must be at least 2");
  if (options.n < 40) throw DataError("synthetic moons: n must be at least 40");
  RawTable t = synth_moons_table(options);
  RowRanges ranges;
  for (std::size_t s = 0; s < options.k; ++s) ranges.emplace_back(s * options.n, (s + 1) * options.n);
  return partition_subsets(t, moons_spec(), ranges, test_fraction, options.seed);
}

void write_moons_dir(const std::string& dir, const MoonsOptions& options) {
  if (options.k < 2) throw DataError("synthetic moons: k must be at least 2");
  if (options.n < 40) throw DataError("synthetic moons: n must be at least 40");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());
  RawTable all = synth_moons_table(options);
  for (std::size_t s = 0; s < options.k; ++s) {
    RawTable part;
    part.header = {"x1", "x2", "label"};
    for (std::size_t i = s * options.n; i < (s + 1) * options.n; ++i) {
      const auto& r = all.rows[i];
      part.rows.push_back({r[0], r[1], r[2]});
    }
    write_csv_file((fs::path(dir) / ("subset_" + std::to_string(s + 1) + ".csv")).string(), part);
  }
  DatasetSpec spec = moons_spec();
  spec.subset_column.reset();
  std::ofstream out(fs::path(dir) / "schema.json", std::ios::binary);
  if (!out) throw DataError("cannot write schema.json in '" + dir + "'");
  out << dataset_spec_json(spec);
}

ShiftedDataset load_dataset_dir(const std::string& dir, double test_fraction, std::uint64_t seed) {
  const fs::path root(dir);
  std::ifstream sf(root / "schema.json");
  if (!sf) throw DataError("dataset directory '" + dir + "' has no schema.json");
  std::stringstream buf;
  buf << sf.rdbuf();
  const DatasetSpec spec = parse_dataset_spec(buf.str());

  std::vector<std::string> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(root, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path().string());
  }
  if (ec) throw DataError("cannot list '" + dir + "': " + ec.message());
  if (files.empty()) throw DataError("dataset directory '" + dir + "' has no .csv files");
  std::sort(files.begin(), files.end(), natural_less);

  RawTable merged;
  RowRanges ranges;
  for (const auto& f : files) {
    RawTable t = read_csv(f);
    if (merged.header.empty()) {
      merged.header = t.header;
    } else if (t.header != merged.header) {
      throw DataError("CSV '" + f + "' has a different header from the first file");
    }
    const std::size_t begin = merged.rows.size();
    for (auto& r : t.rows) merged.rows.push_back(std::move(r));
    ranges.emplace_back(begin, merged.rows.size());
  }
  if (spec.subset_column) return partition_subsets(merged, spec, test_fraction, seed);
  ShiftedDataset ds = partition_subsets(merged, spec, ranges, test_fraction, seed);
  for (std::size_t i = 0; i < files.size(); ++i) ds.subsets[i].key = fs::path(files[i]).stem().string();
  return ds;
}

namespace {
std::pair<Matrix, std::vector<double>> stack(const ShiftedDataset& ds, const std::vector<std::size_t>& which,
                                             bool train) {
  std::vector<Matrix> parts;
  std::vector<double> y;
  for (auto i : which) {
    const auto& s = ds.subsets.at(i);
    parts.push_back(train ? s.x_train : s.x_test);
    const auto& ys = train ? s.y_train : s.y_test;
    y.insert(y.end(), ys.begin(), ys.end());
  }
  Matrix x = vstack(parts);
  if (x.rows == 0) x.cols = ds.schema.encoded_dim();
  return {std::move(x), std::move(y)};
}
}  // namespace

std::pair<Matrix, std::vector<double>> stack_train(const ShiftedDataset& ds, const std::vector<std::size_t>& which) {
  return stack(ds, which, true);
}

std::pair<Matrix, std::vector<double>> stack_test(const ShiftedDataset& ds, const std::vector<std::size_t>& which) {
  return stack(ds, which, false);
}

}  // namespace recourse::data
