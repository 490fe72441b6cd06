#include "ntl/raster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ntl/bytes.hpp"
#include "ntl/error.hpp"

namespace ntl {

namespace {

constexpr char kMagic[4] = {'N', 'T', 'L', 'R'};
constexpr uint16_t kVersion = 1;
constexpr uint8_t kDtypeF32 = 0;

}  // namespace

Raster Raster::filled(int rows, int cols, float value) {
  Raster r;
  r.rows = rows;
  r.cols = cols;
  r.data.assign(std::size_t(rows) * std::size_t(cols), value);
  return r;
}

bool same_shape(const Raster& a, const Raster& b) {
  return a.rows == b.rows && a.cols == b.cols;
}

bool bit_equal(const Raster& a, const Raster& b) {
  if (!same_shape(a, b)) return false;
  if (std::bit_cast<uint64_t>(a.x0) != std::bit_cast<uint64_t>(b.x0)) return false;
  if (std::bit_cast<uint64_t>(a.y0) != std::bit_cast<uint64_t>(b.y0)) return false;
  if (std::bit_cast<uint64_t>(a.dx) != std::bit_cast<uint64_t>(b.dx)) return false;
  if (std::bit_cast<uint64_t>(a.dy) != std::bit_cast<uint64_t>(b.dy)) return false;
  if (std::bit_cast<uint32_t>(a.nodata) != std::bit_cast<uint32_t>(b.nodata)) return false;
  return a.data.size() == b.data.size() &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

Mask Mask::filled(int rows, int cols, uint8_t value) {
  Mask m;
  m.rows = rows;
  m.cols = cols;
  m.bits.assign(std::size_t(rows) * std::size_t(cols), value);
  return m;
}

bool operator==(const Mask& a, const Mask& b) {
  return a.rows == b.rows && a.cols == b.cols && a.bits == b.bits;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw DataError("quantile: q outside [0, 1]");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const double h = q * double(n - 1);
  const std::size_t lo = std::size_t(h);
  const double frac = h - double(lo);
  if (lo + 1 >= n || frac == 0.0) return values[lo];
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

Mask mask_product(const std::vector<Mask>& masks) {
  if (masks.empty()) throw DataError("mask_product: empty mask list");
  Mask out = masks.front();
  for (std::size_t i = 1; i < masks.size(); ++i) {
    const Mask& m = masks[i];
    if (m.rows != out.rows || m.cols != out.cols)
      throw DataError("mask_product: mask shapes differ");
    for (std::size_t k = 0; k < out.bits.size(); ++k)
      out.bits[k] = out.bits[k] & m.bits[k];
  }
  return out;
}

Raster extract_tile(const Raster& r, const TileRef& t) {
  if (t.height <= 0 || t.width <= 0)
    throw DataError("extract_tile: non-positive tile extent");
  if (t.anchor_row < 0 || t.anchor_col < 0 || t.anchor_row + t.height > r.rows ||
      t.anchor_col + t.width > r.cols)
    throw DataError("extract_tile: tile outside raster bounds");
  Raster out;
  out.rows = t.height;
  out.cols = t.width;
  out.x0 = r.x0 + double(t.anchor_col) * r.dx;
  out.y0 = r.y0 + double(t.anchor_row) * r.dy;
  out.dx = r.dx;
  out.dy = r.dy;
  out.nodata = r.nodata;
  out.data.resize(std::size_t(t.height) * t.width);
  for (int i = 0; i < t.height; ++i) {
    const float* src = &r.data[std::size_t(t.anchor_row + i) * r.cols + t.anchor_col];
    std::copy(src, src + t.width, &out.data[std::size_t(i) * t.width]);
  }
  return out;
}

double lit_fraction(const Raster& r) {
  if (r.data.empty()) throw DataError("lit_fraction: empty raster");
  std::size_t lit = 0;
  for (float v : r.data)
    if (!r.is_nodata(v) && v > 0.0f) ++lit;
  return double(lit) / double(r.data.size());
}

std::vector<uint8_t> to_ntlr_bytes(const Raster& r) {
  if (r.rows <= 0 || r.cols <= 0 || r.data.size() != std::size_t(r.rows) * r.cols)
    throw DataError("ntlr: raster dimensions inconsistent with payload");
  std::vector<uint8_t> out;
  out.reserve(52 + r.data.size() * 4);
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kVersion);
  out.push_back(kDtypeF32);
  out.push_back(0);  // reserved
  put_u32(out, uint32_t(r.rows));
  put_u32(out, uint32_t(r.cols));
  put_f64(out, r.x0);
  put_f64(out, r.y0);
  put_f64(out, r.dx);
  put_f64(out, r.dy);
  put_f32(out, r.nodata);
  for (float v : r.data) put_f32(out, v);
  return out;
}

Raster from_ntlr_bytes(const uint8_t* bytes, std::size_t n) {
  ByteReader in{bytes, n, "ntlr"};
  in.need(4);
  if (std::memcmp(bytes, kMagic, 4) != 0) throw DataError("ntlr: bad magic");
  in.pos = 4;
  if (in.u16() != kVersion) throw DataError("ntlr: unsupported version");
  if (in.u8() != kDtypeF32) throw DataError("ntlr: unsupported dtype");
  in.u8();  // reserved
  Raster r;
  uint32_t rows = in.u32();
  uint32_t cols = in.u32();
  if (rows == 0 || cols == 0 || uint64_t(rows) * cols > (uint64_t(1) << 33))
    throw DataError("ntlr: implausible dimensions");
  r.rows = int(rows);
  r.cols = int(cols);
  r.x0 = in.f64();
  r.y0 = in.f64();
  r.dx = in.f64();
  r.dy = in.f64();
  r.nodata = in.f32();
  r.data.resize(std::size_t(rows) * cols);
  for (auto& v : r.data) v = in.f32();
  if (in.pos != n) throw DataError("ntlr: trailing bytes after payload");
  return r;
}

void write_ntlr(const std::filesystem::path& path, const Raster& r) {
  auto bytes = to_ntlr_bytes(r);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("ntlr: cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw DataError("ntlr: write failed: " + path.string());
}

Raster read_ntlr(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("ntlr: cannot open: " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return from_ntlr_bytes(bytes.data(), bytes.size());
}

void write_pgm16(const std::filesystem::path& path, const Raster& r) {
  // Linear stretch over the valid-value range; nodata renders as 0.
  float lo = 0.0f, hi = 1.0f;
  bool seen = false;
  for (float v : r.data) {
    if (r.is_nodata(v)) continue;
    if (!seen) {
      lo = hi = v;
      seen = true;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!seen) lo = hi = 0.0f;
  const double span = (hi > lo) ? double(hi) - double(lo) : 1.0;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("pgm: cannot open for writing: " + path.string());
  out << "P5\n" << r.cols << " " << r.rows << "\n65535\n";
  for (float v : r.data) {
    uint16_t s = 0;
    if (!r.is_nodata(v))
      s = uint16_t(std::lround(std::clamp((double(v) - lo) / span, 0.0, 1.0) * 65535.0));
    out.put(char(s >> 8));
    out.put(char(s & 0xff));
  }
  if (!out) throw DataError("pgm: write failed: " + path.string());

  std::ofstream side(path.string() + ".txt");
  side << "source_rows " << r.rows << "\nsource_cols " << r.cols << "\n"
       << "value_min " << lo << "\nvalue_max " << hi << "\n"
       << "scaling sample = round((value - value_min) / (value_max - value_min) * 65535)\n"
       << "nodata rendered_as 0\n";
}

}  // namespace ntl
