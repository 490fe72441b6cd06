#include "ntl/tiling.hpp"

#include <algorithm>
#include <cmath>

#include "ntl/error.hpp"
#include "ntl/ops.hpp"

namespace ntl::pipeline {

Raster bilinear_upsample2x(const Raster& r) {
  if (r.rows < 1 || r.cols < 1) throw DataError("bilinear_upsample2x: empty raster");
  Raster out;
  out.rows = 2 * r.rows;
  out.cols = 2 * r.cols;
  out.x0 = r.x0;
  out.y0 = r.y0;
  out.dx = r.dx / 2.0;
  out.dy = r.dy / 2.0;
  out.nodata = r.nodata;
  out.data.resize(std::size_t(out.rows) * out.cols);

  auto src_axis = [](int o) {
    // Half-pixel centers: output center o maps to (o + 0.5)/2 - 0.5.
    return (double(o) + 0.5) / 2.0 - 0.5;
  };
  for (int i = 0; i < out.rows; ++i) {
    const double y = std::clamp(src_axis(i), 0.0, double(r.rows - 1));
    const int y0 = int(y);
    const int y1 = std::min(y0 + 1, r.rows - 1);
    const double fy = y - double(y0);
    for (int j = 0; j < out.cols; ++j) {
      const double x = std::clamp(src_axis(j), 0.0, double(r.cols - 1));
      const int x0 = int(x);
      const int x1 = std::min(x0 + 1, r.cols - 1);
      const double fx = x - double(x0);
      const double top =
          double(r.at(y0, x0)) + fx * (double(r.at(y0, x1)) - double(r.at(y0, x0)));
      const double bot =
          double(r.at(y1, x0)) + fx * (double(r.at(y1, x1)) - double(r.at(y1, x0)));
      out.at(i, j) = float(top + fy * (bot - top));
    }
  }
  return out;
}

std::pair<std::vector<Raster>, TileLayout> tile_grid(const Raster& r, int tile_h,
                                                     int tile_w) {
  if (tile_h < 1 || tile_w < 1) throw DataError("tile_grid: tile dims must be >= 1");
  if (r.rows < 1 || r.cols < 1) throw DataError("tile_grid: empty raster");
  TileLayout layout;
  layout.source_rows = r.rows;
  layout.source_cols = r.cols;
  layout.tile_h = tile_h;
  layout.tile_w = tile_w;
  layout.grid_rows = (r.rows + tile_h - 1) / tile_h;
  layout.grid_cols = (r.cols + tile_w - 1) / tile_w;
  layout.pad_bottom = layout.grid_rows * tile_h - r.rows;
  layout.pad_right = layout.grid_cols * tile_w - r.cols;

  Raster padded = r;
  if (layout.pad_bottom > 0 || layout.pad_right > 0) {
    padded = Raster::filled(r.rows + layout.pad_bottom, r.cols + layout.pad_right, 0.0f);
    padded.x0 = r.x0;
    padded.y0 = r.y0;
    padded.dx = r.dx;
    padded.dy = r.dy;
    padded.nodata = r.nodata;
    for (int i = 0; i < r.rows; ++i)
      for (int j = 0; j < r.cols; ++j) padded.at(i, j) = r.at(i, j);
  }

  std::vector<Raster> tiles;
  tiles.reserve(std::size_t(layout.grid_rows) * layout.grid_cols);
  for (int ti = 0; ti < layout.grid_rows; ++ti)
    for (int tj = 0; tj < layout.grid_cols; ++tj)
      tiles.push_back(
          extract_tile(padded, {ti * tile_h, tj * tile_w, tile_h, tile_w}));
  return {std::move(tiles), layout};
}

Raster reassemble(const std::vector<Raster>& tiles, const TileLayout& layout) {
  const std::size_t expected =
      std::size_t(layout.grid_rows) * std::size_t(layout.grid_cols);
  if (tiles.size() != expected)
    throw DataError("reassemble: expected " + std::to_string(expected) +
                    " tiles, got " + std::to_string(tiles.size()));
  for (const auto& t : tiles)
    if (t.rows != layout.tile_h || t.cols != layout.tile_w)
      throw DataError("reassemble: tile dims do not match the layout");

  Raster out = Raster::filled(layout.source_rows, layout.source_cols, 0.0f);
  out.x0 = tiles.front().x0;
  out.y0 = tiles.front().y0;
  out.dx = tiles.front().dx;
  out.dy = tiles.front().dy;
  out.nodata = tiles.front().nodata;
  for (int ti = 0; ti < layout.grid_rows; ++ti)
    for (int tj = 0; tj < layout.grid_cols; ++tj) {
      const Raster& t = tiles[std::size_t(ti) * layout.grid_cols + tj];
      const int i_hi = std::min(layout.tile_h, layout.source_rows - ti * layout.tile_h);
      const int j_hi = std::min(layout.tile_w, layout.source_cols - tj * layout.tile_w);
      for (int i = 0; i < i_hi; ++i)
        for (int j = 0; j < j_hi; ++j)
          out.at(ti * layout.tile_h + i, tj * layout.tile_w + j) = t.at(i, j);
    }
  return out;
}

namespace {

// Window anchors covering [0, total) with full windows; the last anchor is
// clamped so no window runs past the end. Assumes total >= tile.
std::vector<int> cover_anchors(int total, int tile, int stride) {
  std::vector<int> a;
  int r = 0;
  for (;;) {
    a.push_back(r);
    if (r + tile >= total) break;
    r = std::min(r + stride, total - tile);
  }
  return a;
}

Raster zero_pad_to(const Raster& r, int rows, int cols) {
  if (r.rows == rows && r.cols == cols) return r;
  Raster padded = Raster::filled(rows, cols, 0.0f);
  padded.x0 = r.x0;
  padded.y0 = r.y0;
  padded.dx = r.dx;
  padded.dy = r.dy;
  padded.nodata = r.nodata;
  for (int i = 0; i < r.rows; ++i)
    for (int j = 0; j < r.cols; ++j) padded.at(i, j) = r.at(i, j);
  return padded;
}

}  // namespace

Raster reconstruct_year(model::Params<float>& params, const model::ModelConfig& cfg,
                        const Raster& dmsp_ref, const Raster& dmsp_tgt,
                        const Raster& viirs_ref, double ceil, int overlap) {
  if (!same_shape(dmsp_ref, dmsp_tgt))
    throw DataError("reconstruct_year: DMSP raster dimensions differ");
  if (viirs_ref.rows != 2 * dmsp_ref.rows || viirs_ref.cols != 2 * dmsp_ref.cols)
    throw DataError("reconstruct_year: VIIRS dimensions must be exactly double the DMSP dimensions");
  if (!(ceil > 0.0)) throw DataError("reconstruct_year: ceil must be positive");
  if (overlap < 0 || overlap >= cfg.h || overlap >= cfg.w)
    throw DataError("reconstruct_year: overlap must be in [0, tile dim)");

  const float dmsp_norm = model::param(params, "io.dmsp_norm").values()[0];
  const float viirs_norm = model::param(params, "io.viirs_norm").values()[0];
  if (!(dmsp_norm > 0.0f) || !(viirs_norm > 0.0f))
    throw DataError("reconstruct_year: normalization constants must be positive");

  const std::size_t lo_px = std::size_t(cfg.h) * cfg.w;
  const std::size_t hi_px = lo_px * 4;
  // Denormalized but unclamped model output for one tile triple.
  auto run_tile = [&](const Raster& ref_t, const Raster& tgt_t,
                      const Raster& hi_t) {
    std::vector<float> dr(lo_px), dt(lo_px), vr(hi_px);
    for (std::size_t i = 0; i < lo_px; ++i) {
      dr[i] = ref_t.data[i] / dmsp_norm;
      dt[i] = tgt_t.data[i] / dmsp_norm;
    }
    for (std::size_t i = 0; i < hi_px; ++i) vr[i] = hi_t.data[i] / viirs_norm;
    auto out = model::deepntl_forward(
        ad::Tensor<float>::from_values({1, 1, cfg.h, cfg.w}, std::move(dr)),
        ad::Tensor<float>::from_values({1, 1, cfg.h, cfg.w}, std::move(dt)),
        ad::Tensor<float>::from_values({1, 1, 2 * cfg.h, 2 * cfg.w}, std::move(vr)),
        params, cfg, false);
    std::vector<double> denorm(hi_px);
    for (std::size_t i = 0; i < hi_px; ++i)
      denorm[i] = double(out.values()[i]) * double(viirs_norm);
    return denorm;
  };

  ad::NoGradGuard<float> guard;
  if (overlap == 0) {
    auto [ref_tiles, layout] = tile_grid(dmsp_ref, cfg.h, cfg.w);
    auto [tgt_tiles, tgt_layout] = tile_grid(dmsp_tgt, cfg.h, cfg.w);
    auto [hi_tiles, hi_layout] = tile_grid(viirs_ref, 2 * cfg.h, 2 * cfg.w);
    (void)layout;
    (void)tgt_layout;

    std::vector<Raster> out_tiles;
    out_tiles.reserve(ref_tiles.size());
    for (std::size_t k = 0; k < ref_tiles.size(); ++k) {
      const auto denorm = run_tile(ref_tiles[k], tgt_tiles[k], hi_tiles[k]);
      Raster tile = hi_tiles[k];
      for (std::size_t i = 0; i < hi_px; ++i)
        tile.data[i] = float(std::clamp(denorm[i], 0.0, ceil));
      out_tiles.push_back(std::move(tile));
    }
    return reassemble(out_tiles, hi_layout);
  }

  // Seam-study mode: sliding windows, per-pixel average, one final clamp.
  const int pr = std::max(dmsp_ref.rows, cfg.h);
  const int pc = std::max(dmsp_ref.cols, cfg.w);
  const Raster ref_p = zero_pad_to(dmsp_ref, pr, pc);
  const Raster tgt_p = zero_pad_to(dmsp_tgt, pr, pc);
  const Raster hi_p = zero_pad_to(viirs_ref, 2 * pr, 2 * pc);
  const auto anchors_r = cover_anchors(pr, cfg.h, cfg.h - overlap);
  const auto anchors_c = cover_anchors(pc, cfg.w, cfg.w - overlap);

  std::vector<double> acc(std::size_t(2 * pr) * (2 * pc), 0.0);
  std::vector<int> cnt(acc.size(), 0);
  for (int ar : anchors_r)
    for (int ac : anchors_c) {
      const Raster ref_t = extract_tile(ref_p, {ar, ac, cfg.h, cfg.w});
      const Raster tgt_t = extract_tile(tgt_p, {ar, ac, cfg.h, cfg.w});
      const Raster hi_t = extract_tile(hi_p, {2 * ar, 2 * ac, 2 * cfg.h, 2 * cfg.w});
      const auto denorm = run_tile(ref_t, tgt_t, hi_t);
      for (int i = 0; i < 2 * cfg.h; ++i)
        for (int j = 0; j < 2 * cfg.w; ++j) {
          const std::size_t p =
              std::size_t(2 * ar + i) * (2 * pc) + std::size_t(2 * ac + j);
          acc[p] += denorm[std::size_t(i) * (2 * cfg.w) + j];
          cnt[p] += 1;
        }
    }

  Raster out = Raster::filled(viirs_ref.rows, viirs_ref.cols, 0.0f);
  out.x0 = viirs_ref.x0;
  out.y0 = viirs_ref.y0;
  out.dx = viirs_ref.dx;
  out.dy = viirs_ref.dy;
  out.nodata = viirs_ref.nodata;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) {
      const std::size_t p = std::size_t(i) * (2 * pc) + std::size_t(j);
      out.at(i, j) = float(std::clamp(acc[p] / double(cnt[p]), 0.0, ceil));
    }
  return out;
}

}  // namespace ntl::pipeline
