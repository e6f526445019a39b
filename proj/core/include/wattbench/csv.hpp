#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wattbench::csv {

// Splits on commas; no quoting (none of the wattbench formats need it). A
// trailing \r is stripped so CRLF files parse.
std::vector<std::string> split_line(const std::string& line);

struct Row {
  std::vector<std::string> cells;
  std::size_t line_number = 0;  // 1-based, header included
};

// Reads the header (must be present) and all non-empty data rows.
struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;
};

Table read_table(std::istream& in, const std::string& what);

double parse_double(const std::string& cell, std::size_t line_number, const std::string& what);

std::string format_double(double value);

}  // namespace wattbench::csv
