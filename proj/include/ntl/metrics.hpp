#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "ntl/raster.hpp"

namespace ntl::metrics {

struct MetricsReport {
  double r = 0.0;
  double psnr = 0.0;  // +infinity when the images match exactly
  double ssim = 0.0;
  std::size_t n = 0;
  double max_used = 0.0;
};

// Correlation over every pixel, zeros included. Throws on shape mismatch,
// fewer than two pixels, or zero variance in either image.
double pearson_r(const Raster& gt, const Raster& sr);

// 10 log10(MAX^2 / MSE); zero MSE maps to +infinity.
double psnr(const Raster& gt, const Raster& sr, double max_val);

// One global window, population variances, C1 = (0.01 MAX)^2 and
// C2 = (0.03 MAX)^2.
double ssim_global(const Raster& gt, const Raster& sr, double max_val);

MetricsReport evaluate_pair(const Raster& gt, const Raster& sr,
                            double max_val = 496.0);

struct MetricsRow {
  std::string scope_label;
  MetricsReport report;
};

// Columns: scope_label,r,psnr,ssim,n,max_used. +infinity prints as "inf".
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricsRow>& rows);

}  // namespace ntl::metrics
