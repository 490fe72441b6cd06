#include "ntl/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "ntl/csv.hpp"
#include "ntl/error.hpp"
#include "ntl/rng.hpp"

namespace fs = std::filesystem;

namespace ntl::dataset {

Raster clean_viirs(const Raster& r, double floor, double ceil) {
  if (!(floor < ceil)) throw DataError("clean_viirs: floor must be below ceil");
  Raster out = r;
  for (auto& v : out.data) {
    if (r.is_nodata(v)) continue;
    if (double(v) < floor)
      v = 0.0f;
    else if (double(v) > ceil)
      v = float(ceil);
  }
  return out;
}

double viirs_ceiling(const std::vector<Raster>& rasters, double q) {
  std::vector<double> lit;
  for (const auto& r : rasters)
    for (float v : r.data)
      if (!r.is_nodata(v) && v > 0.0f) lit.push_back(double(v));
  if (lit.empty()) throw DataError("viirs_ceiling: no lit pixels");
  return quantile(std::move(lit), q);
}

std::vector<TileRef> sample_points(const Raster& dmsp_ref, const Raster& viirs_ref,
                                   int n, double min_lit, int tile_h, int tile_w,
                                   uint64_t seed, int max_attempts_per_point) {
  if (viirs_ref.rows != 2 * dmsp_ref.rows || viirs_ref.cols != 2 * dmsp_ref.cols)
    throw DataError("sample_points: high-res dims must be exactly double");
  if (tile_h < 1 || tile_w < 1 || tile_h > dmsp_ref.rows || tile_w > dmsp_ref.cols)
    throw DataError("sample_points: tile does not fit the raster");
  if (n < 0) throw DataError("sample_points: negative count");

  std::vector<TileRef> out;
  out.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::substream(seed, uint64_t(i));
    bool placed = false;
    for (int attempt = 0; attempt < max_attempts_per_point; ++attempt) {
      TileRef t;
      t.height = tile_h;
      t.width = tile_w;
      t.anchor_row = rng.uniform_int(0, dmsp_ref.rows - tile_h);
      t.anchor_col = rng.uniform_int(0, dmsp_ref.cols - tile_w);
      TileRef t2{2 * t.anchor_row, 2 * t.anchor_col, 2 * tile_h, 2 * tile_w};
      if (lit_fraction(extract_tile(dmsp_ref, t)) > min_lit &&
          lit_fraction(extract_tile(viirs_ref, t2)) > min_lit) {
        out.push_back(t);
        placed = true;
        break;
      }
    }
    if (!placed)
      throw DataError("sample_points: insufficient lit area after " +
                      std::to_string(max_attempts_per_point) +
                      " attempts for point " + std::to_string(i));
  }
  return out;
}

namespace {

uint64_t fnv1a64(const uint8_t* p, std::size_t n) {
  uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

// Content-addressed store: identical tiles (the per-point reference tiles
// in particular) land on the same file and are written once.
std::string store_tile(const Raster& tile, const fs::path& root) {
  const auto bytes = to_ntlr_bytes(tile);
  const uint64_t h = fnv1a64(bytes.data(), bytes.size());
  char rel[40];
  std::snprintf(rel, sizeof rel, "tiles/%02x/%016llx.ntlr", unsigned(h >> 56),
                static_cast<unsigned long long>(h));
  const fs::path path = root / rel;
  if (!fs::exists(path)) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("dataset: cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              std::streamsize(bytes.size()));
    if (!out) throw DataError("dataset: write failed for " + path.string());
  }
  return rel;
}

}  // namespace

DatasetManifest build_examples(const std::vector<TileRef>& points,
                               const Raster& ref_dmsp, const Raster& ref_viirs,
                               const std::vector<TargetProduct>& targets,
                               const fs::path& root) {
  if (ref_viirs.rows != 2 * ref_dmsp.rows || ref_viirs.cols != 2 * ref_dmsp.cols)
    throw DataError("build_examples: high-res dims must be exactly double");
  for (const auto& t : targets) {
    if (!same_shape(t.dmsp, ref_dmsp) || !same_shape(t.viirs, ref_viirs))
      throw DataError("build_examples: target rasters must match the reference grid");
    calib::validate(t.product);
  }

  DatasetManifest m;
  m.examples.reserve(points.size() * targets.size());
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const TileRef& lo = points[pi];
    const TileRef hi{2 * lo.anchor_row, 2 * lo.anchor_col, 2 * lo.height,
                     2 * lo.width};
    const std::string ref_d = store_tile(extract_tile(ref_dmsp, lo), root);
    const std::string ref_v = store_tile(extract_tile(ref_viirs, hi), root);
    for (const auto& t : targets) {
      Example e;
      char id[64];
      std::snprintf(id, sizeof id, "p%05zu_%d_%s", pi, t.product.year,
                    t.product.satellite.c_str());
      e.example_id = id;
      e.split = "train";
      e.target_year = t.product.year;
      e.target_satellite = t.product.satellite;
      e.anchor_row = lo.anchor_row;
      e.anchor_col = lo.anchor_col;
      e.dmsp_ref_path = ref_d;
      e.viirs_ref_path = ref_v;
      e.dmsp_tgt_path = store_tile(extract_tile(t.dmsp, lo), root);
      e.viirs_tgt_path = store_tile(extract_tile(t.viirs, hi), root);
      m.examples.push_back(std::move(e));
    }
  }
  return m;
}

void mark_test_years(DatasetManifest& m, const std::set<int>& years) {
  for (auto& e : m.examples)
    if (years.count(e.target_year)) e.split = "test";
}

DatasetManifest split_manifest(const DatasetManifest& m, double train_frac,
                               uint64_t seed, bool by_point) {
  if (m.examples.empty()) throw DataError("split_manifest: empty manifest");
  if (train_frac < 0.0 || train_frac > 1.0)
    throw DataError("split_manifest: train fraction out of range");

  DatasetManifest out = m;
  out.seed = seed;
  Rng rng(seed);

  auto assign = [&](std::vector<std::size_t> idx, auto label_fn) {
    // Fisher-Yates, then the first round(frac*n) go to train.
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[std::size_t(rng.uniform_int(0, int(i) - 1))]);
    const std::size_t n_train =
        std::size_t(std::llround(train_frac * double(idx.size())));
    for (std::size_t k = 0; k < idx.size(); ++k)
      label_fn(idx[k], k < n_train ? "train" : "val");
  };

  if (!by_point) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < out.examples.size(); ++i)
      if (out.examples[i].split != "test") idx.push_back(i);
    assign(std::move(idx),
           [&](std::size_t i, const char* s) { out.examples[i].split = s; });
  } else {
    std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < out.examples.size(); ++i)
      if (out.examples[i].split != "test")
        groups[{out.examples[i].anchor_row, out.examples[i].anchor_col}]
            .push_back(i);
    std::vector<std::size_t> gidx(groups.size());
    for (std::size_t i = 0; i < gidx.size(); ++i) gidx[i] = i;
    std::vector<const std::vector<std::size_t>*> members;
    members.reserve(groups.size());
    for (const auto& [key, v] : groups) members.push_back(&v);
    assign(std::move(gidx), [&](std::size_t g, const char* s) {
      for (std::size_t i : *members[g]) out.examples[i].split = s;
    });
  }
  return out;
}

namespace {

constexpr const char* kManifestHeader =
    "example_id,split,target_year,target_satellite,anchor_row,anchor_col,"
    "dmsp_ref_path,dmsp_tgt_path,viirs_ref_path,viirs_tgt_path";

}  // namespace

void write_manifest_csv(const fs::path& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw DataError("manifest: cannot write " + path.string());
  out << kManifestHeader << "\n";
  for (const auto& e : m.examples)
    out << e.example_id << ',' << e.split << ',' << e.target_year << ','
        << e.target_satellite << ',' << e.anchor_row << ',' << e.anchor_col << ','
        << e.dmsp_ref_path << ',' << e.dmsp_tgt_path << ',' << e.viirs_ref_path
        << ',' << e.viirs_tgt_path << "\n";
  if (!out) throw DataError("manifest: write failed for " + path.string());
}

DatasetManifest read_manifest_csv(const fs::path& path) {
  const auto rows = csv::read_rows(path);
  if (rows.empty()) throw DataError("manifest: empty file " + path.string());
  {
    std::string header;
    for (std::size_t i = 0; i < rows[0].size(); ++i) {
      if (i) header += ',';
      header += rows[0][i];
    }
    if (header != kManifestHeader)
      throw DataError("manifest: unexpected header in " + path.string());
  }
  DatasetManifest m;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 10)
      throw DataError("manifest: row " + std::to_string(i + 1) +
                      " has wrong field count");
    Example e;
    e.example_id = r[0];
    e.split = r[1];
    if (e.split != "train" && e.split != "val" && e.split != "test")
      throw DataError("manifest: bad split label '" + e.split + "'");
    e.target_year = int(csv::to_long(r[2], "manifest target_year"));
    e.target_satellite = r[3];
    e.anchor_row = int(csv::to_long(r[4], "manifest anchor_row"));
    e.anchor_col = int(csv::to_long(r[5], "manifest anchor_col"));
    e.dmsp_ref_path = r[6];
    e.dmsp_tgt_path = r[7];
    e.viirs_ref_path = r[8];
    e.viirs_tgt_path = r[9];
    m.examples.push_back(std::move(e));
  }
  return m;
}

LoadedExample load_example(const Example& e, const fs::path& root) {
  LoadedExample le;
  le.dmsp_ref = read_ntlr(root / e.dmsp_ref_path);
  le.dmsp_tgt = read_ntlr(root / e.dmsp_tgt_path);
  le.viirs_ref = read_ntlr(root / e.viirs_ref_path);
  le.viirs_tgt = read_ntlr(root / e.viirs_tgt_path);
  if (!same_shape(le.dmsp_ref, le.dmsp_tgt) ||
      !same_shape(le.viirs_ref, le.viirs_tgt) ||
      le.viirs_ref.rows != 2 * le.dmsp_ref.rows ||
      le.viirs_ref.cols != 2 * le.dmsp_ref.cols)
    throw DataError("dataset: inconsistent tile shapes for " + e.example_id);
  return le;
}

std::vector<LoadedExample> load_examples(const DatasetManifest& m,
                                         const fs::path& root,
                                         const std::string& split) {
  std::vector<LoadedExample> out;
  for (const auto& e : m.examples)
    if (split.empty() || e.split == split) out.push_back(load_example(e, root));
  return out;
}

Raster box_downsample2x(const Raster& r) {
  if (r.rows % 2 != 0 || r.cols % 2 != 0)
    throw DataError("box_downsample2x: dims must be even");
  Raster out;
  out.rows = r.rows / 2;
  out.cols = r.cols / 2;
  out.x0 = r.x0;
  out.y0 = r.y0;
  out.dx = r.dx * 2.0;
  out.dy = r.dy * 2.0;
  out.nodata = r.nodata;
  out.data.resize(std::size_t(out.rows) * out.cols);
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) {
      const double s = double(r.at(2 * i, 2 * j)) + double(r.at(2 * i, 2 * j + 1)) +
                       double(r.at(2 * i + 1, 2 * j)) +
                       double(r.at(2 * i + 1, 2 * j + 1));
      out.at(i, j) = float(s / 4.0);
    }
  return out;
}

Raster gaussian_blur(const Raster& r, double sigma, int radius) {
  if (sigma <= 0.0 || radius < 1) throw DataError("gaussian_blur: bad kernel");
  std::vector<double> k(std::size_t(radius) + 1);
  for (int i = 0; i <= radius; ++i) k[std::size_t(i)] = std::exp(-0.5 * (double(i) * i) / (sigma * sigma));

  // Separable passes, renormalized over the in-bounds taps. The sum is
  // anchored on the center pixel's deviations, so a constant field comes
  // back bit-identical (every deviation is exactly zero).
  auto pass = [&](const std::vector<double>& src, std::vector<double>& dst,
                  int rows, int cols, bool horizontal) {
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        const double center = src[std::size_t(i) * cols + j];
        double acc = 0.0, wsum = 0.0;
        for (int d = -radius; d <= radius; ++d) {
          const int ii = horizontal ? i : i + d;
          const int jj = horizontal ? j + d : j;
          if (ii < 0 || ii >= rows || jj < 0 || jj >= cols) continue;
          const double w = k[std::size_t(d < 0 ? -d : d)];
          acc += w * (src[std::size_t(ii) * cols + jj] - center);
          wsum += w;
        }
        dst[std::size_t(i) * cols + j] = center + acc / wsum;
      }
  };

  std::vector<double> a(r.data.begin(), r.data.end());
  std::vector<double> b(a.size());
  pass(a, b, r.rows, r.cols, true);
  pass(b, a, r.rows, r.cols, false);
  Raster out = r;
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = float(a[i]);
  return out;
}

namespace {

// Paints plateau-plus-skirt blobs and thin line segments onto a dark field.
void paint_scene(Raster& hi, const std::vector<SynthBlob>& blobs, int year,
                 const std::vector<double>& year_gain, int ref_year, Rng& jitter,
                 std::vector<std::array<double, 5>> const& lines) {
  const int rows = hi.rows, cols = hi.cols;
  std::vector<double> field(std::size_t(rows) * cols, 0.0);

  for (std::size_t bi = 0; bi < blobs.size(); ++bi) {
    const SynthBlob& b = blobs[bi];
    const double gain =
        year_gain[std::size_t(year - ref_year)] * jitter.uniform(0.85, 1.2);
    if (b.birth_year > year) continue;
    const double amp = b.amplitude * gain;
    const double skirt = std::max(2.0, b.radius * 0.5);
    const int reach = int(b.radius + 4.0 * skirt) + 1;
    const int r0 = std::max(0, int(b.center_r) - reach);
    const int r1 = std::min(rows - 1, int(b.center_r) + reach);
    const int c0 = std::max(0, int(b.center_c) - reach);
    const int c1 = std::min(cols - 1, int(b.center_c) + reach);
    for (int i = r0; i <= r1; ++i)
      for (int j = c0; j <= c1; ++j) {
        const double d = std::hypot(i - b.center_r, j - b.center_c);
        double v;
        if (d <= b.radius) {
          v = amp;
        } else {
          const double t = (d - b.radius) / skirt;
          v = amp * std::exp(-0.5 * t * t);
        }
        field[std::size_t(i) * cols + j] += v;
      }
  }

  for (const auto& ln : lines) {
    const double r0 = ln[0], c0 = ln[1], r1 = ln[2], c1 = ln[3], amp = ln[4];
    const double len = std::hypot(r1 - r0, c1 - c0);
    const int steps = std::max(2, int(len * 2.0));
    for (int s = 0; s <= steps; ++s) {
      const double t = double(s) / steps;
      const int i = int(std::lround(r0 + t * (r1 - r0)));
      const int j = int(std::lround(c0 + t * (c1 - c0)));
      if (i < 0 || i >= rows || j < 0 || j >= cols) continue;
      double& cell = field[std::size_t(i) * cols + j];
      cell = std::max(cell, amp);
    }
  }

  for (std::size_t i = 0; i < field.size(); ++i)
    hi.data[i] = float(std::clamp(field[i], 0.0, 496.0));
}

Raster dmsp_from_viirs(const Raster& viirs, double sat_radiance) {
  Raster blurred = gaussian_blur(box_downsample2x(viirs));
  Raster dmsp = blurred;
  for (auto& v : dmsp.data)
    v = float(std::min(63.0, double(v) * 63.0 / sat_radiance));
  return dmsp;
}

std::vector<SynthBlob> draw_blobs(Rng& rng, int hi_rows, int hi_cols, int ref_year,
                                  int n_years) {
  const int n = 6 + int(rng.uniform_int(0, 5));
  std::vector<SynthBlob> blobs;
  blobs.reserve(std::size_t(n));
  for (int b = 0; b < n; ++b) {
    SynthBlob blob;
    blob.center_r = rng.uniform(0.1 * hi_rows, 0.9 * hi_rows);
    blob.center_c = rng.uniform(0.1 * hi_cols, 0.9 * hi_cols);
    if (b == 0) {
      // One guaranteed saturating city core with a plateau wide enough to
      // survive downsampling and blur untouched at its center.
      blob.radius = rng.uniform(20.0, 26.0);
      blob.amplitude = rng.uniform(320.0, 460.0);
      blob.birth_year = ref_year;
    } else {
      blob.radius = rng.uniform(3.0, 14.0);
      blob.amplitude = rng.uniform(25.0, 300.0);
      blob.birth_year =
          rng.next_double() < 0.25 && n_years > 1
              ? ref_year + int(rng.uniform_int(1, std::max(1, n_years - 1)))
              : ref_year;
    }
    blobs.push_back(blob);
  }
  return blobs;
}

std::vector<std::array<double, 5>> draw_lines(Rng& rng, int hi_rows, int hi_cols) {
  const int n = 2 + int(rng.uniform_int(0, 2));
  std::vector<std::array<double, 5>> lines;
  lines.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i)
    lines.push_back({rng.uniform(0, hi_rows - 1.0), rng.uniform(0, hi_cols - 1.0),
                     rng.uniform(0, hi_rows - 1.0), rng.uniform(0, hi_cols - 1.0),
                     rng.uniform(15.0, 70.0)});
  return lines;
}

}  // namespace

SynthScene synth_scene_full(uint64_t seed, int rows, int cols,
                            double sat_radiance) {
  if (rows % 2 != 0 || cols % 2 != 0 || rows < 8 || cols < 8)
    throw DataError("synth_scene: dims must be even and at least 8");
  const int hr = 2 * rows, hc = 2 * cols;
  Rng rng(seed);
  auto blobs = draw_blobs(rng, hr, hc, 2013, 1);
  auto lines = draw_lines(rng, hr, hc);

  SynthScene s;
  s.blobs = blobs;
  s.viirs = Raster::filled(hr, hc, 0.0f);
  Rng jitter = Rng::substream(seed, 0xb10b);
  paint_scene(s.viirs, blobs, 2013, {1.0}, 2013, jitter, lines);
  s.box_down = box_downsample2x(s.viirs);
  s.blurred = gaussian_blur(s.box_down);
  s.dmsp = s.blurred;
  for (auto& v : s.dmsp.data)
    v = float(std::min(63.0, double(v) * 63.0 / sat_radiance));
  return s;
}

std::pair<Raster, Raster> synth_scene(uint64_t seed, int rows, int cols) {
  SynthScene s = synth_scene_full(seed, rows, cols);
  return {std::move(s.dmsp), std::move(s.viirs)};
}

SynthSeries synth_series(uint64_t seed, int rows, int cols, int n_years,
                         double sat_radiance) {
  if (rows % 2 != 0 || cols % 2 != 0 || rows < 8 || cols < 8)
    throw DataError("synth_series: dims must be even and at least 8");
  if (n_years < 1 || n_years > 7)
    throw DataError("synth_series: year count must be in [1, 7]");
  const int ref_year = 2013;
  const int hr = 2 * rows, hc = 2 * cols;

  Rng rng(seed);
  auto blobs = draw_blobs(rng, hr, hc, ref_year, n_years);
  auto lines = draw_lines(rng, hr, hc);
  std::vector<double> year_gain(static_cast<std::size_t>(n_years));
  for (int y = 0; y < n_years; ++y)
    year_gain[std::size_t(y)] = (y == 0) ? 1.0 : rng.uniform(0.8, 1.3);

  SynthSeries series;
  series.ref_year = ref_year;
  for (int y = 0; y < n_years; ++y) {
    Raster viirs = Raster::filled(hr, hc, 0.0f);
    Rng jitter = Rng::substream(seed, 0x9ea0 + uint64_t(y));
    paint_scene(viirs, blobs, ref_year + y, year_gain, ref_year, jitter, lines);
    TargetProduct t;
    t.product = {ref_year + y, "F18", calib::Sensor::dmsp};
    t.viirs = viirs;
    t.dmsp = dmsp_from_viirs(viirs, sat_radiance);
    if (y == 0) {
      series.ref_dmsp = t.dmsp;
      series.ref_viirs = t.viirs;
    }
    series.targets.push_back(std::move(t));
  }
  return series;
}

}  // namespace ntl::dataset
