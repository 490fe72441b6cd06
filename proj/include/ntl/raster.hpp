#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace ntl {

// Row-major single-band grid. (x0, y0) is the outer corner of pixel (0, 0);
// dy is negative for north-up data. Cells equal to the nodata sentinel are
// excluded from every statistic.
struct Raster {
  int rows = 0;
  int cols = 0;
  double x0 = 0.0;
  double y0 = 0.0;
  double dx = 1.0;
  double dy = -1.0;
  float nodata = -1.0f;
  std::vector<float> data;

  static Raster filled(int rows, int cols, float value);

  float& at(int r, int c) { return data[std::size_t(r) * cols + c]; }
  float at(int r, int c) const { return data[std::size_t(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
  bool is_nodata(float v) const { return v == nodata; }
};

// Identical grid shape; says nothing about georeferencing or payload.
bool same_shape(const Raster& a, const Raster& b);

// Field-for-field and bit-for-bit payload equality.
bool bit_equal(const Raster& a, const Raster& b);

struct Mask {
  int rows = 0;
  int cols = 0;
  std::vector<uint8_t> bits;

  static Mask filled(int rows, int cols, uint8_t value);

  uint8_t& at(int r, int c) { return bits[std::size_t(r) * cols + c]; }
  uint8_t at(int r, int c) const { return bits[std::size_t(r) * cols + c]; }
};

bool operator==(const Mask& a, const Mask& b);

// Tile anchored at (anchor_row, anchor_col), covering height x width pixels.
struct TileRef {
  int anchor_row = 0;
  int anchor_col = 0;
  int height = 0;
  int width = 0;
};

// Linear-interpolation quantile: rank h = q * (n - 1), result
// v[floor(h)] + (h - floor(h)) * (v[floor(h) + 1] - v[floor(h)]).
// Sorts its own copy of the input. Throws DataError on empty input or
// q outside [0, 1].
double quantile(std::vector<double> values, double q);

// Elementwise AND over same-shape masks. Throws on empty list or mixed shapes.
Mask mask_product(const std::vector<Mask>& masks);

// Copies the tile's pixels and shifts the geographic origin by whole pixels.
// Throws if the tile leaves the raster or has a non-positive extent.
Raster extract_tile(const Raster& r, const TileRef& t);

// Fraction of all pixels that are lit: not nodata and strictly positive.
double lit_fraction(const Raster& r);

// NTLR v1 container: magic "NTLR", u16 version = 1, u8 dtype = 0 (float32),
// u8 reserved = 0, u32 rows, u32 cols, f64 x0, y0, dx, dy, f32 nodata,
// then rows * cols float32 values row-major. Everything little-endian.
std::vector<uint8_t> to_ntlr_bytes(const Raster& r);
Raster from_ntlr_bytes(const uint8_t* bytes, std::size_t n);
void write_ntlr(const std::filesystem::path& path, const Raster& r);
Raster read_ntlr(const std::filesystem::path& path);

// 16-bit binary PGM export with a text sidecar recording the linear value
// scaling, so the image can be interpreted quantitatively.
void write_pgm16(const std::filesystem::path& path, const Raster& r);

}  // namespace ntl
