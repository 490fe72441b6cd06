#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ntl/calib.hpp"
#include "ntl/raster.hpp"

namespace ntl::dataset {

// One manifest row. Paths are relative to the dataset root so the
// directory can be moved wholesale.
struct Example {
  std::string example_id;
  std::string split;  // train | val | test
  int target_year = 0;
  std::string target_satellite;
  int anchor_row = 0;  // low-res anchor; the high-res anchor is doubled
  int anchor_col = 0;
  std::string dmsp_ref_path;
  std::string dmsp_tgt_path;
  std::string viirs_ref_path;
  std::string viirs_tgt_path;
};

struct DatasetManifest {
  std::vector<Example> examples;
  uint64_t seed = 0;
};

// Radiance cleaning: dim pixels to zero, bright outliers to the ceiling.
Raster clean_viirs(const Raster& r, double floor = 0.5, double ceil = 496.0);

// Ceiling = quantile over lit (value > 0) pixels pooled across rasters.
double viirs_ceiling(const std::vector<Raster>& rasters, double q = 0.9999);

// Rejection-samples n tile anchors whose low-res and co-located high-res
// tiles are both sufficiently lit. Each point draws from its own
// (seed, index) substream, so results are order-independent.
std::vector<TileRef> sample_points(const Raster& dmsp_ref, const Raster& viirs_ref,
                                   int n, double min_lit, int tile_h, int tile_w,
                                   uint64_t seed, int max_attempts_per_point = 1000);

struct TargetProduct {
  calib::ProductId product;
  Raster dmsp;
  Raster viirs;
};

// Extracts points x targets tile quadruples, writes each tile once into a
// content-addressed store under root (tiles/<2 hex>/<16 hex>.ntlr), and
// returns the manifest with every example labeled "train".
DatasetManifest build_examples(const std::vector<TileRef>& points,
                               const Raster& ref_dmsp, const Raster& ref_viirs,
                               const std::vector<TargetProduct>& targets,
                               const std::filesystem::path& root);

// Relabels examples of the given target years as the test split.
void mark_test_years(DatasetManifest& m, const std::set<int>& years);

// Reassigns non-test examples to train/val, train count = round(frac * n).
// by_point keeps all examples sharing an anchor in the same split.
DatasetManifest split_manifest(const DatasetManifest& m, double train_frac,
                               uint64_t seed, bool by_point = false);

void write_manifest_csv(const std::filesystem::path& path,
                        const DatasetManifest& m);
DatasetManifest read_manifest_csv(const std::filesystem::path& path);

struct LoadedExample {
  Raster dmsp_ref;
  Raster dmsp_tgt;
  Raster viirs_ref;
  Raster viirs_tgt;
};

LoadedExample load_example(const Example& e, const std::filesystem::path& root);

// Loads every example of the given split ("" = all), preserving order.
std::vector<LoadedExample> load_examples(const DatasetManifest& m,
                                         const std::filesystem::path& root,
                                         const std::string& split);

// Synthetic scenes: flat-top bright blobs with Gaussian skirts plus thin
// line features on a dark background. The low-res counterpart is formed by
// box downsampling, Gaussian blur (overglow surrogate), rescaling so
// sat_radiance maps to 63, and clipping.
struct SynthBlob {
  double center_r = 0;  // high-res pixel coordinates
  double center_c = 0;
  double radius = 0;     // flat plateau radius
  double amplitude = 0;  // plateau radiance
  int birth_year = 0;    // first year the blob exists
};

struct SynthScene {
  Raster viirs;     // (2 rows, 2 cols), clamped to [0, 496]
  Raster dmsp;      // (rows, cols), in [0, 63]
  Raster box_down;  // intermediate: 2x box downsample of viirs
  Raster blurred;   // intermediate: Gaussian blur of box_down
  std::vector<SynthBlob> blobs;
};

Raster box_downsample2x(const Raster& r);
Raster gaussian_blur(const Raster& r, double sigma = 1.0, int radius = 3);

SynthScene synth_scene_full(uint64_t seed, int rows, int cols,
                            double sat_radiance = 200.0);
std::pair<Raster, Raster> synth_scene(uint64_t seed, int rows, int cols);

// A multi-year synthetic archive sharing one geometry: per-year brightness
// factors, per-blob-per-year jitter, and blobs that switch on at their
// birth year. The first year doubles as the reference pairing and is also
// present among the targets.
struct SynthSeries {
  int ref_year = 0;
  Raster ref_dmsp;
  Raster ref_viirs;
  std::vector<TargetProduct> targets;
};

SynthSeries synth_series(uint64_t seed, int rows, int cols, int n_years,
                         double sat_radiance = 200.0);

}  // namespace ntl::dataset
