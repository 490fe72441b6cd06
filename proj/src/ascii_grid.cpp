#include "ntl/ascii_grid.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "ntl/error.hpp"

namespace ntl {

namespace {

struct Token {
  std::string text;
  int line;  // 1-based
  int col;   // 1-based
};

// Splits on whitespace while remembering where each token started, so
// errors can point at the exact spot in the file.
std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::string cur;
  int tok_line = 0, tok_col = 0;
  for (char ch : text) {
    if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n') {
      if (!cur.empty()) {
        out.push_back({cur, tok_line, tok_col});
        cur.clear();
      }
      if (ch == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    } else {
      if (cur.empty()) {
        tok_line = line;
        tok_col = col;
      }
      cur += ch;
      ++col;
    }
  }
  if (!cur.empty()) out.push_back({cur, tok_line, tok_col});
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

[[noreturn]] void fail_at(const Token& t, const std::string& what) {
  std::ostringstream msg;
  msg << "ascii grid: " << what << " at line " << t.line << ", column " << t.col
      << " ('" << t.text << "')";
  throw DataError(msg.str());
}

double parse_number(const Token& t) {
  const char* s = t.text.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end != s + t.text.size()) fail_at(t, "expected a number");
  return v;
}

bool is_header_key(const std::string& lowered) {
  return lowered == "ncols" || lowered == "nrows" || lowered == "xllcorner" ||
         lowered == "xllcenter" || lowered == "yllcorner" || lowered == "yllcenter" ||
         lowered == "cellsize" || lowered == "nodata_value";
}

}  // namespace

Raster parse_ascii_grid(const std::string& text) {
  const std::vector<Token> toks = tokenize(text);
  std::map<std::string, double> header;
  std::size_t i = 0;
  while (i + 1 < toks.size() && is_header_key(lower(toks[i].text))) {
    std::string key = lower(toks[i].text);
    if (header.count(key)) fail_at(toks[i], "duplicate header key");
    header[key] = parse_number(toks[i + 1]);
    i += 2;
  }

  auto require = [&](const char* key) -> double {
    auto it = header.find(key);
    if (it == header.end())
      throw DataError(std::string("ascii grid: header missing required key '") + key + "'");
    return it->second;
  };
  if (header.empty()) throw DataError("ascii grid: missing or malformed header");

  const double ncols_d = require("ncols");
  const double nrows_d = require("nrows");
  const double cellsize = require("cellsize");
  const int ncols = int(ncols_d);
  const int nrows = int(nrows_d);
  if (ncols <= 0 || nrows <= 0 || double(ncols) != ncols_d || double(nrows) != nrows_d)
    throw DataError("ascii grid: nrows/ncols must be positive integers");
  if (!(cellsize > 0.0)) throw DataError("ascii grid: cellsize must be positive");

  double xll, yll;
  if (header.count("xllcorner"))
    xll = header["xllcorner"];
  else if (header.count("xllcenter"))
    xll = header["xllcenter"] - cellsize / 2.0;
  else
    throw DataError("ascii grid: header missing xllcorner/xllcenter");
  if (header.count("yllcorner"))
    yll = header["yllcorner"];
  else if (header.count("yllcenter"))
    yll = header["yllcenter"] - cellsize / 2.0;
  else
    throw DataError("ascii grid: header missing yllcorner/yllcenter");

  Raster r;
  r.rows = nrows;
  r.cols = ncols;
  r.dx = cellsize;
  r.dy = -cellsize;
  r.x0 = xll;
  // The first data row is the northern edge.
  r.y0 = yll + double(nrows) * cellsize;
  if (header.count("nodata_value")) r.nodata = float(header["nodata_value"]);

  const std::size_t expected = std::size_t(nrows) * std::size_t(ncols);
  const std::size_t avail = toks.size() - i;
  if (avail < expected) {
    std::ostringstream msg;
    msg << "ascii grid: expected " << expected << " values, found " << avail;
    throw DataError(msg.str());
  }
  if (avail > expected) fail_at(toks[i + expected], "unexpected extra token");

  r.data.resize(expected);
  for (std::size_t k = 0; k < expected; ++k)
    r.data[k] = float(parse_number(toks[i + k]));
  return r;
}

Raster read_ascii_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("ascii grid: cannot open: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ascii_grid(ss.str());
}

}  // namespace ntl
