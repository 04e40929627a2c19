#pragma once

#include <string>
#include <vector>

namespace nesy {

/// Header plus rows of cells. Writing uses `,` separators, `.` decimals and
/// `\n` line endings; cells containing `,`, `"` or newlines are quoted.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row) { rows.push_back(std::move(row)); }
  /// Index of a header column; throws SchemaError when absent.
  std::size_t column(const std::string& name) const;
};

std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);
void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

}  // namespace nesy
