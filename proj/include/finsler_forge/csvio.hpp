#pragma once

#include <string>
#include <vector>

namespace finsler {

// Shortest 17-significant-digit decimal form; round-trips to the same bits.
std::string format_double(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> cells);
};

// UTF-8, comma separated, '.' decimal, LF line endings.
void export_csv(const CsvTable& table, const std::string& path);
CsvTable read_csv(const std::string& path);

}  // namespace finsler
