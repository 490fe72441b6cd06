#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ntl/raster.hpp"

namespace ntl::calib {

enum class Sensor { dmsp, viirs };

struct ProductId {
  int year = 0;
  std::string satellite;  // "F10".."F18" for DMSP, platform code otherwise
  Sensor sensor = Sensor::dmsp;
};

// Throws DataError when the year is outside the sensor's operating range.
void validate(const ProductId& id);

std::string product_label(const ProductId& id);

// Quadratic map from a product's digital numbers onto the base image:
// base ~= a * dn^2 + b * dn + c.
struct CalibrationFit {
  ProductId product;
  double a = 0.0;
  double b = 1.0;
  double c = 0.0;
  double r2 = 1.0;
};

// Co-registered annual composites, one raster per product, identical grids.
struct CalibrationStack {
  std::vector<ProductId> products;
  std::vector<Raster> rasters;
};

void validate(const CalibrationStack& s);

// Coefficient of variation (population sigma over mean) in each pixel's
// 3x3 neighborhood. Border pixels, windows touching nodata, and windows
// with zero mean emit the nodata sentinel.
Raster spatial_vc(const Raster& r);

// Per-pixel coefficient of variation across the stack. Needs at least two
// products; pixels with any nodata or zero mean emit the sentinel.
Raster temporal_vc(const CalibrationStack& s);

// 1 where vc is valid and strictly below the threshold.
Mask vc_mask(const Raster& vc, double threshold);

// 0 exactly where the value equals the saturation ceiling (63); 1 elsewhere.
Mask unsaturated_mask(const Raster& r);

// Stable-pixel selection: the product of per-product spatial stability
// masks (threshold = pooled spatial_q quantile of all valid spatial vc
// values), the temporal stability mask (temporal_q quantile of valid
// temporal vc values), and every product's unsaturated mask.
Mask calibration_fields(const CalibrationStack& s, double spatial_q = 0.25,
                        double temporal_q = 0.25);

// Least-squares quadratic through the selected pixels, target DN on the
// abscissa, base DN on the ordinate. Throws when fewer than 3 pixels
// survive selection or fewer than 3 distinct target values remain.
CalibrationFit fit_quadratic(const Raster& target, const Raster& base, const Mask& cf);

// Applies the fit to every lit pixel and clamps to [0, 63]. Zeros stay
// zero, nodata stays nodata.
Raster apply_calibration(const Raster& r, const CalibrationFit& fit);

// Sum of all valid pixel values, accumulated in 64-bit.
double tlv(const Raster& r);

struct TlvRow {
  ProductId product;
  double total = 0.0;
};

void write_fits_csv(const std::filesystem::path& path,
                    const std::vector<CalibrationFit>& fits);
std::vector<CalibrationFit> read_fits_csv(const std::filesystem::path& path);
void write_tlv_csv(const std::filesystem::path& path, const std::vector<TlvRow>& rows);

}  // namespace ntl::calib
