#include "ntl/calib.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "ntl/csv.hpp"
#include "ntl/error.hpp"

namespace ntl::calib {

namespace {

constexpr float kSaturationDn = 63.0f;

// Coefficient of variation over values already gathered from a window or a
// pixel column. Returns false when the statistic is undefined (zero mean).
bool coeff_of_variation(const double* vals, int n, double& out) {
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += vals[i];
  const double mean = sum / double(n);
  if (mean == 0.0) return false;
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = vals[i] - mean;
    ss += d * d;
  }
  out = std::sqrt(ss / double(n)) / mean;
  return true;
}

// Solves the symmetric 3x3 system via Gaussian elimination with partial
// pivoting; the matrices here are tiny but can be poorly scaled.
bool solve3(double m[3][4]) {
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (std::abs(m[piv][col]) < 1e-30) return false;
    if (piv != col)
      for (int k = 0; k < 4; ++k) std::swap(m[piv][k], m[col][k]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int k = col; k < 4; ++k) m[r][k] -= f * m[col][k];
    }
  }
  for (int r = 0; r < 3; ++r) m[r][3] /= m[r][r];
  return true;
}

}  // namespace

void validate(const ProductId& id) {
  if (id.sensor == Sensor::dmsp) {
    if (id.year < 1992 || id.year > 2019)
      throw DataError("product " + product_label(id) + ": year outside 1992-2019");
  } else {
    if (id.year < 2012)
      throw DataError("product " + product_label(id) + ": year before 2012");
  }
}

std::string product_label(const ProductId& id) {
  return std::to_string(id.year) + "/" + id.satellite;
}

void validate(const CalibrationStack& s) {
  if (s.products.size() != s.rasters.size())
    throw DataError("calibration stack: product/raster count mismatch");
  if (s.rasters.empty()) throw DataError("calibration stack: empty");
  for (const ProductId& p : s.products) validate(p);
  for (const Raster& r : s.rasters)
    if (!same_shape(r, s.rasters.front()))
      throw DataError("calibration stack: raster grids differ");
}

Raster spatial_vc(const Raster& r) {
  Raster out = Raster::filled(r.rows, r.cols, r.nodata);
  out.x0 = r.x0;
  out.y0 = r.y0;
  out.dx = r.dx;
  out.dy = r.dy;
  out.nodata = r.nodata;
  std::fill(out.data.begin(), out.data.end(), r.nodata);
  double win[9];
  for (int i = 1; i + 1 < r.rows; ++i) {
    for (int j = 1; j + 1 < r.cols; ++j) {
      bool ok = true;
      int k = 0;
      for (int di = -1; di <= 1 && ok; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          const float v = r.at(i + di, j + dj);
          if (r.is_nodata(v)) {
            ok = false;
            break;
          }
          win[k++] = double(v);
        }
      double vc;
      if (ok && coeff_of_variation(win, 9, vc)) out.at(i, j) = float(vc);
    }
  }
  return out;
}

Raster temporal_vc(const CalibrationStack& s) {
  validate(s);
  if (s.rasters.size() < 2)
    throw DataError("temporal_vc: needs at least two products");
  const Raster& first = s.rasters.front();
  Raster out = Raster::filled(first.rows, first.cols, first.nodata);
  out.x0 = first.x0;
  out.y0 = first.y0;
  out.dx = first.dx;
  out.dy = first.dy;
  std::fill(out.data.begin(), out.data.end(), out.nodata);
  std::vector<double> vals(s.rasters.size());
  for (std::size_t k = 0; k < first.data.size(); ++k) {
    bool ok = true;
    for (std::size_t p = 0; p < s.rasters.size(); ++p) {
      const float v = s.rasters[p].data[k];
      if (s.rasters[p].is_nodata(v)) {
        ok = false;
        break;
      }
      vals[p] = double(v);
    }
    double vc;
    if (ok && coeff_of_variation(vals.data(), int(vals.size()), vc))
      out.data[k] = float(vc);
  }
  return out;
}

Mask vc_mask(const Raster& vc, double threshold) {
  Mask m = Mask::filled(vc.rows, vc.cols, 0);
  for (std::size_t k = 0; k < vc.data.size(); ++k) {
    const float v = vc.data[k];
    m.bits[k] = (!vc.is_nodata(v) && double(v) < threshold) ? 1 : 0;
  }
  return m;
}

Mask unsaturated_mask(const Raster& r) {
  Mask m = Mask::filled(r.rows, r.cols, 1);
  for (std::size_t k = 0; k < r.data.size(); ++k)
    if (r.data[k] == kSaturationDn) m.bits[k] = 0;
  return m;
}

Mask calibration_fields(const CalibrationStack& s, double spatial_q, double temporal_q) {
  validate(s);
  std::vector<Mask> parts;

  std::vector<Raster> svcs;
  std::vector<double> pool;
  for (const Raster& r : s.rasters) {
    svcs.push_back(spatial_vc(r));
    const Raster& vc = svcs.back();
    for (float v : vc.data)
      if (!vc.is_nodata(v)) pool.push_back(double(v));
  }
  // Empty pool means no window had valid statistics anywhere; every spatial
  // mask is all-zero regardless of threshold.
  const double sthr = pool.empty() ? 0.0 : quantile(pool, spatial_q);
  for (const Raster& vc : svcs) parts.push_back(vc_mask(vc, sthr));

  const Raster tvc = temporal_vc(s);
  std::vector<double> tpool;
  for (float v : tvc.data)
    if (!tvc.is_nodata(v)) tpool.push_back(double(v));
  const double tthr = tpool.empty() ? 0.0 : quantile(tpool, temporal_q);
  parts.push_back(vc_mask(tvc, tthr));

  for (const Raster& r : s.rasters) parts.push_back(unsaturated_mask(r));
  return mask_product(parts);
}

CalibrationFit fit_quadratic(const Raster& target, const Raster& base, const Mask& cf) {
  if (!same_shape(target, base) || target.rows != cf.rows || target.cols != cf.cols)
    throw DataError("fit_quadratic: shape mismatch");

  // Normal equations for base ~= a t^2 + b t + c over selected valid pixels.
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  double sy = 0, sty = 0, st2y = 0;
  std::set<float> distinct;
  std::size_t n = 0;
  for (std::size_t k = 0; k < cf.bits.size(); ++k) {
    if (!cf.bits[k]) continue;
    const float tf = target.data[k];
    const float bf = base.data[k];
    if (target.is_nodata(tf) || base.is_nodata(bf)) continue;
    const double t = double(tf), y = double(bf);
    const double t2 = t * t;
    s0 += 1;
    s1 += t;
    s2 += t2;
    s3 += t2 * t;
    s4 += t2 * t2;
    sy += y;
    sty += t * y;
    st2y += t2 * y;
    if (distinct.size() < 3) distinct.insert(tf);
    ++n;
  }
  if (n < 3) throw DataError("fit_quadratic: fewer than 3 selected pixels");
  if (distinct.size() < 3)
    throw DataError("fit_quadratic: fewer than 3 distinct target values");

  double m[3][4] = {
      {s4, s3, s2, st2y},
      {s3, s2, s1, sty},
      {s2, s1, s0, sy},
  };
  if (!solve3(m)) throw DataError("fit_quadratic: singular normal equations");

  CalibrationFit fit;
  fit.a = m[0][3];
  fit.b = m[1][3];
  fit.c = m[2][3];

  const double mean_y = sy / s0;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t k = 0; k < cf.bits.size(); ++k) {
    if (!cf.bits[k]) continue;
    const float tf = target.data[k];
    const float bf = base.data[k];
    if (target.is_nodata(tf) || base.is_nodata(bf)) continue;
    const double t = double(tf), y = double(bf);
    const double pred = fit.a * t * t + fit.b * t + fit.c;
    ss_res += (y - pred) * (y - pred);
    ss_tot += (y - mean_y) * (y - mean_y);
  }
  if (ss_tot == 0.0)
    fit.r2 = (ss_res == 0.0) ? 1.0 : 0.0;
  else
    fit.r2 = 1.0 - ss_res / ss_tot;
  return fit;
}

Raster apply_calibration(const Raster& r, const CalibrationFit& fit) {
  Raster out = r;
  for (auto& v : out.data) {
    if (out.is_nodata(v) || v == 0.0f) continue;
    const double t = double(v);
    const double y = fit.a * t * t + fit.b * t + fit.c;
    v = float(std::clamp(y, 0.0, 63.0));
  }
  return out;
}

double tlv(const Raster& r) {
  double sum = 0.0;
  for (float v : r.data)
    if (!r.is_nodata(v)) sum += double(v);
  return sum;
}

void write_fits_csv(const std::filesystem::path& path,
                    const std::vector<CalibrationFit>& fits) {
  std::ofstream out(path);
  if (!out) throw DataError("fits csv: cannot open for writing: " + path.string());
  out << "year,satellite,a,b,c,r2\n";
  for (const CalibrationFit& f : fits)
    out << f.product.year << "," << f.product.satellite << "," << csv::fmt(f.a) << ","
        << csv::fmt(f.b) << "," << csv::fmt(f.c) << "," << csv::fmt(f.r2) << "\n";
}

std::vector<CalibrationFit> read_fits_csv(const std::filesystem::path& path) {
  auto rows = csv::read_rows(path);
  if (rows.empty() || rows.front().size() != 6 || rows.front()[0] != "year")
    throw DataError("fits csv: missing or malformed header: " + path.string());
  std::vector<CalibrationFit> fits;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 6) throw DataError("fits csv: wrong column count");
    CalibrationFit f;
    f.product.year = int(csv::to_long(r[0], "fits csv year"));
    f.product.satellite = r[1];
    f.product.sensor = Sensor::dmsp;
    f.a = csv::to_double(r[2], "fits csv a");
    f.b = csv::to_double(r[3], "fits csv b");
    f.c = csv::to_double(r[4], "fits csv c");
    f.r2 = csv::to_double(r[5], "fits csv r2");
    fits.push_back(std::move(f));
  }
  return fits;
}

void write_tlv_csv(const std::filesystem::path& path, const std::vector<TlvRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("tlv csv: cannot open for writing: " + path.string());
  out << "year,satellite,tlv\n";
  for (const TlvRow& r : rows)
    out << r.product.year << "," << r.product.satellite << "," << csv::fmt(r.total)
        << "\n";
}

}  // namespace ntl::calib
