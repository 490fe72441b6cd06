#pragma once

#include <utility>
#include <vector>

#include "ntl/model.hpp"
#include "ntl/raster.hpp"

namespace ntl::pipeline {

// Grid bookkeeping for the pad-tile-reassemble round trip.
struct TileLayout {
  int source_rows = 0;
  int source_cols = 0;
  int tile_h = 0;
  int tile_w = 0;
  int grid_rows = 0;
  int grid_cols = 0;
  int pad_bottom = 0;
  int pad_right = 0;
};

// 2x upsampling with half-pixel-center alignment and edge clamping.
Raster bilinear_upsample2x(const Raster& r);

// Zero-pads to whole tiles and cuts a row-major non-overlapping grid.
std::pair<std::vector<Raster>, TileLayout> tile_grid(const Raster& r, int tile_h,
                                                     int tile_w);

// Exact inverse of tile_grid, padding cropped away.
Raster reassemble(const std::vector<Raster>& tiles, const TileLayout& layout);

// Tiles the inputs at the checkpoint's tile size (high-res tiles at doubled
// dims and anchors), runs the model tile by tile without batch statistics,
// reassembles, and clamps to [0, ceil]. overlap = 0 uses the non-overlapping
// zero-padded grid; overlap > 0 switches to a seam-study mode that slides
// windows at stride (tile - overlap) with edge-clamped anchors and averages
// the per-pixel contributions before clamping.
Raster reconstruct_year(model::Params<float>& params, const model::ModelConfig& cfg,
                        const Raster& dmsp_ref, const Raster& dmsp_tgt,
                        const Raster& viirs_ref, double ceil = 496.0,
                        int overlap = 0);

}  // namespace ntl::pipeline
