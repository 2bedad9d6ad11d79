#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace recourse {

// A CSV file held as strings: one header row plus data rows of equal width.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column_index(const std::string& name) const;
  // Throws DataError naming the column when absent.
  std::size_t require_column(const std::string& name) const;
};

// Comma-separated, header row required. Double-quoted fields may contain
// commas and doubled quotes. Throws DataError on ragged rows.
RawTable parse_csv(std::istream& in, const std::string& source = "<stream>");
RawTable read_csv(const std::string& path);

void write_csv(std::ostream& out, const RawTable& table);
void write_csv_file(const std::string& path, const RawTable& table);

// Shortest text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace recourse
