#include "ntl/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "ntl/csv.hpp"
#include "ntl/error.hpp"

namespace ntl::metrics {

namespace {

void require_same_shape(const Raster& gt, const Raster& sr, const char* what) {
  if (!same_shape(gt, sr))
    throw DataError(std::string(what) + ": images must share dimensions");
}

double mean_of(const Raster& r) {
  double s = 0.0;
  for (float v : r.data) s += double(v);
  return s / double(r.data.size());
}

}  // namespace

double pearson_r(const Raster& gt, const Raster& sr) {
  require_same_shape(gt, sr, "pearson_r");
  const std::size_t n = gt.data.size();
  if (n < 2) throw DataError("pearson_r: needs at least two pixels");
  const double mg = mean_of(gt);
  const double ms = mean_of(sr);
  double num = 0.0, dg = 0.0, ds = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = double(gt.data[i]) - mg;
    const double b = double(sr.data[i]) - ms;
    num += a * b;
    dg += a * a;
    ds += b * b;
  }
  if (dg == 0.0 || ds == 0.0)
    throw DataError("pearson_r: undefined for a constant image");
  // sqrt of the product: for bit-identical inputs num == dg == ds, and
  // sqrt(s * s) == s in round-to-nearest, so the identity pair gives 1.
  return num / std::sqrt(dg * ds);
}

double psnr(const Raster& gt, const Raster& sr, double max_val) {
  require_same_shape(gt, sr, "psnr");
  if (gt.data.empty()) throw DataError("psnr: empty image");
  if (!(max_val > 0.0)) throw DataError("psnr: max value must be positive");
  double sq = 0.0;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const double d = double(gt.data[i]) - double(sr.data[i]);
    sq += d * d;
  }
  const double mse = sq / double(gt.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_val * max_val / mse);
}

double ssim_global(const Raster& gt, const Raster& sr, double max_val) {
  require_same_shape(gt, sr, "ssim_global");
  if (gt.data.empty()) throw DataError("ssim_global: empty image");
  if (!(max_val > 0.0)) throw DataError("ssim_global: max value must be positive");
  const std::size_t n = gt.data.size();
  const double mg = mean_of(gt);
  const double ms = mean_of(sr);
  double vg = 0.0, vs = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = double(gt.data[i]) - mg;
    const double b = double(sr.data[i]) - ms;
    vg += a * a;
    vs += b * b;
    cov += a * b;
  }
  vg /= double(n);
  vs /= double(n);
  cov /= double(n);
  const double c1 = (0.01 * max_val) * (0.01 * max_val);
  const double c2 = (0.03 * max_val) * (0.03 * max_val);
  return ((2.0 * mg * ms + c1) * (2.0 * cov + c2)) /
         ((mg * mg + ms * ms + c1) * (vg + vs + c2));
}

MetricsReport evaluate_pair(const Raster& gt, const Raster& sr, double max_val) {
  MetricsReport rep;
  rep.r = pearson_r(gt, sr);
  rep.psnr = psnr(gt, sr, max_val);
  rep.ssim = ssim_global(gt, sr, max_val);
  rep.n = gt.data.size();
  rep.max_used = max_val;
  return rep;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("metrics: cannot write " + path.string());
  out << "scope_label,r,psnr,ssim,n,max_used\n";
  for (const auto& row : rows) {
    const auto& m = row.report;
    out << row.scope_label << ',' << csv::fmt(m.r) << ','
        << (std::isinf(m.psnr) ? "inf" : csv::fmt(m.psnr)) << ','
        << csv::fmt(m.ssim) << ',' << m.n << ',' << csv::fmt(m.max_used) << "\n";
  }
  if (!out) throw DataError("metrics: write failed for " + path.string());
}

}  // namespace ntl::metrics
