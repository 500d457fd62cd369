#pragma once

#include <string>
#include <vector>

namespace deeplin {

// Numeric CSV with a header row. "nan"/"inf" cells parse as such.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // throws if absent
  bool has(const std::string& name) const;
  std::vector<double> col(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

// Writes to path + ".tmp" and renames, so readers never see a partial file.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace deeplin
