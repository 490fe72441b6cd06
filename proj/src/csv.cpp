#include "ntl/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ntl/error.hpp"

namespace ntl::csv {

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("csv: cannot open: " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(float v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", double(v));
  return buf;
}

double to_double(const std::string& s, const char* context) {
  const char* c = s.c_str();
  char* end = nullptr;
  double v = std::strtod(c, &end);
  if (end != c + s.size() || s.empty())
    throw DataError(std::string(context) + ": expected a number, got '" + s + "'");
  return v;
}

long to_long(const std::string& s, const char* context) {
  const char* c = s.c_str();
  char* end = nullptr;
  long v = std::strtol(c, &end, 10);
  if (end != c + s.size() || s.empty())
    throw DataError(std::string(context) + ": expected an integer, got '" + s + "'");
  return v;
}

}  // namespace ntl::csv
