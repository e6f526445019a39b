#include "wattbench/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <istream>

#include "wattbench/errors.hpp"

namespace wattbench::csv {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty() && current.back() == '\r') current.pop_back();
  cells.push_back(current);
  return cells;
}

Table read_table(std::istream& in, const std::string& what) {
  Table table;
  std::string line;
  std::size_t line_number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (!have_header) {
      table.header = split_line(line);
      have_header = true;
      continue;
    }
    if (line.empty() || line == "\r") continue;
    table.rows.push_back(Row{split_line(line), line_number});
  }
  if (!have_header) throw Error(ErrorKind::format, what + ": empty file, header expected");
  return table;
}

double parse_double(const std::string& cell, std::size_t line_number, const std::string& what) {
  if (cell.empty()) {
    throw Error(ErrorKind::format,
                what + ": empty numeric cell at line " + std::to_string(line_number));
  }
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || errno == ERANGE) {
    throw Error(ErrorKind::format, what + ": bad number '" + cell + "' at line " +
                                       std::to_string(line_number));
  }
  return value;
}

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

}  // namespace wattbench::csv
