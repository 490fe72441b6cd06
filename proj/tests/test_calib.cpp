#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ntl/calib.hpp"
#include "ntl/error.hpp"
#include "ntl/rng.hpp"
#include "oracles.hpp"

using namespace ntl;
using namespace ntl::calib;

namespace {

// Target values on an exact 1/256 grid so float storage is lossless, base
// computed from the quadratic in double. Makes coefficient recovery exact
// up to solver roundoff.
void make_quadratic_pair(double a, double b, double c, int n, Raster& target,
                         Raster& base) {
  target = Raster::filled(1, n, 0.0f);
  base = Raster::filled(1, n, 0.0f);
  for (int i = 0; i < n; ++i) {
    const double t = std::round(63.0 * 256.0 * i / double(n - 1)) / 256.0;
    target.data[i] = float(t);
    const double td = double(target.data[i]);
    base.data[i] = float(a * td * td + b * td + c);
  }
}

}  // namespace

TEST_CASE("spatial_vc: window statistic and sentinel rules") {
  Raster r = Raster::filled(3, 3, 0.0f);
  for (int i = 0; i < 9; ++i) r.data[i] = float(i + 1);
  Raster vc = spatial_vc(r);
  // population sigma of 1..9 is sqrt(60/9) = 2.581989, mean 5.
  CHECK(vc.at(1, 1) == doctest::Approx(0.5163978).epsilon(1e-6));
  // Everything on the border is sentinel.
  for (int i = 0; i < 9; ++i)
    if (i != 4) CHECK(vc.data[i] == vc.nodata);

  Raster flat = Raster::filled(3, 3, 5.0f);
  CHECK(spatial_vc(flat).at(1, 1) == 0.0f);

  Raster dark = Raster::filled(3, 3, 0.0f);
  CHECK(spatial_vc(dark).at(1, 1) == dark.nodata);

  Raster holed = Raster::filled(3, 3, 5.0f);
  holed.at(0, 2) = holed.nodata;
  CHECK(spatial_vc(holed).at(1, 1) == holed.nodata);
}

TEST_CASE("temporal_vc: per-pixel statistic across products") {
  CalibrationStack s;
  s.products = {{1992, "F10", Sensor::dmsp}, {1993, "F10", Sensor::dmsp}};
  s.rasters = {Raster::filled(1, 2, 10.0f), Raster::filled(1, 2, 20.0f)};
  s.rasters[0].at(0, 1) = 0.0f;
  s.rasters[1].at(0, 1) = 0.0f;
  Raster vc = temporal_vc(s);
  // mean 15, population sigma 5.
  CHECK(vc.at(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-7));
  CHECK(vc.at(0, 1) == vc.nodata);  // zero mean

  CalibrationStack single;
  single.products = {{1992, "F10", Sensor::dmsp}};
  single.rasters = {Raster::filled(1, 1, 1.0f)};
  CHECK_THROWS_AS(temporal_vc(single), DataError);
}

TEST_CASE("vc_mask and unsaturated_mask") {
  Raster vc = Raster::filled(1, 3, 0.0f);
  vc.data = {0.1f, -1.0f, 0.3f};
  Mask m = vc_mask(vc, 0.25);
  CHECK(m.bits == std::vector<uint8_t>{1, 0, 0});

  Raster r = Raster::filled(1, 4, 0.0f);
  r.data = {63.0f, 62.999f, 0.0f, -1.0f};
  Mask u = unsaturated_mask(r);
  CHECK(u.bits == std::vector<uint8_t>{0, 1, 1, 1});
}

TEST_CASE("calibration_fields: equals brute-force enumeration exactly") {
  for (auto [seed, rows, cols, nprod] :
       {std::tuple{7u, 16, 16, 5}, std::tuple{19u, 20, 14, 3}}) {
    CalibrationStack s = oracle::make_dmsp_stack(seed, rows, cols, nprod);
    Mask got = calibration_fields(s, 0.25, 0.25);
    Mask want = oracle::cf_bruteforce(s, 0.25, 0.25);
    REQUIRE(got == want);
  }
}

TEST_CASE("calibration_fields: contained in every component mask") {
  CalibrationStack s = oracle::make_dmsp_stack(23, 18, 18, 4);
  Mask cf = calibration_fields(s, 0.3, 0.3);
  for (const Raster& r : s.rasters) {
    Mask u = unsaturated_mask(r);
    for (std::size_t k = 0; k < cf.bits.size(); ++k)
      if (cf.bits[k]) CHECK(u.bits[k] == 1);
  }
  // Border pixels can never be selected: spatial vc is sentinel there.
  for (int j = 0; j < cf.cols; ++j) {
    CHECK(cf.at(0, j) == 0);
    CHECK(cf.at(cf.rows - 1, j) == 0);
  }
}

TEST_CASE("calibration_fields: all-dark stack selects nothing") {
  CalibrationStack s;
  for (int p = 0; p < 3; ++p) {
    s.products.push_back({1992 + p, "F10", Sensor::dmsp});
    s.rasters.push_back(Raster::filled(8, 8, 0.0f));
  }
  Mask cf = calibration_fields(s);
  CHECK(cf == Mask::filled(8, 8, 0));
}

TEST_CASE("fit_quadratic: exact recovery of synthetic distortions") {
  const double cases[][3] = {
      {-0.0107, 1.6983, -2.3134},
      {0.02, 0.8, 1.0},
      {-0.005, 1.2, 0.5},
  };
  for (const auto& cs : cases) {
    Raster target, base;
    make_quadratic_pair(cs[0], cs[1], cs[2], 4096, target, base);
    CalibrationFit fit = fit_quadratic(target, base, Mask::filled(1, 4096, 1));
    CHECK(fit.a == doctest::Approx(cs[0]).epsilon(1e-6));
    CHECK(fit.b == doctest::Approx(cs[1]).epsilon(1e-6));
    CHECK(fit.c == doctest::Approx(cs[2]).epsilon(1e-6));
    CHECK(fit.r2 >= 1.0 - 1e-9);
  }
}

TEST_CASE("fit_quadratic: identity product fits (0, 1, 0)") {
  Raster target, base;
  make_quadratic_pair(0.0, 1.0, 0.0, 2048, target, base);
  CalibrationFit fit = fit_quadratic(base, base, Mask::filled(1, 2048, 1));
  CHECK(fit.a == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::abs(fit.a) < 1e-6);
  CHECK(fit.b == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(fit.c) < 1e-6);
  CHECK(fit.r2 >= 1.0 - 1e-9);
}

TEST_CASE("fit_quadratic: degenerate selections are rejected") {
  Raster target = Raster::filled(1, 8, 1.0f);
  Raster base = Raster::filled(1, 8, 2.0f);

  Mask two = Mask::filled(1, 8, 0);
  two.bits[0] = two.bits[1] = 1;
  CHECK_THROWS_AS(fit_quadratic(target, base, two), DataError);

  // Plenty of pixels but only two distinct target values.
  for (int i = 0; i < 8; ++i) target.data[i] = (i % 2) ? 5.0f : 9.0f;
  CHECK_THROWS_AS(fit_quadratic(target, base, Mask::filled(1, 8, 1)), DataError);
}

TEST_CASE("fit_quadratic: noise degrades r2 monotonically") {
  for (uint64_t seed : {101u, 202u, 303u}) {
    Rng rng(seed);
    Raster target, clean;
    make_quadratic_pair(-0.008, 1.4, 0.3, 2048, target, clean);
    std::vector<double> eta(2048);
    for (auto& e : eta) e = rng.normal();
    double prev_r2 = 1.0;
    for (double scale : {0.25, 1.0, 3.0, 8.0}) {
      Raster noisy = clean;
      for (int i = 0; i < 2048; ++i)
        noisy.data[i] = float(double(clean.data[i]) + scale * eta[std::size_t(i)]);
      CalibrationFit fit = fit_quadratic(target, noisy, Mask::filled(1, 2048, 1));
      CHECK(fit.r2 < prev_r2);
      prev_r2 = fit.r2;
    }
  }
}

TEST_CASE("apply_calibration: known evaluation, clamping, zero and nodata") {
  CalibrationFit fit;
  fit.a = -0.0107;
  fit.b = 1.6983;
  fit.c = -2.3134;
  Raster r = Raster::filled(1, 4, 0.0f);
  r.data = {63.0f, 0.0f, -1.0f, 1.0f};
  Raster out = apply_calibration(r, fit);
  CHECK(out.at(0, 0) == doctest::Approx(62.2112).epsilon(1e-5));
  CHECK(out.at(0, 1) == 0.0f);   // zeros stay zero
  CHECK(out.at(0, 2) == -1.0f);  // nodata preserved
  // 1.6983 - 0.0107 - 2.3134 < 0 clamps to zero.
  CHECK(out.at(0, 3) == 0.0f);

  // Output always within [0, 63].
  Rng rng(5);
  Raster big = Raster::filled(4, 4, 0.0f);
  for (auto& v : big.data) v = float(rng.uniform(0.0, 63.0));
  CalibrationFit wild;
  wild.a = 0.5;
  wild.b = 2.0;
  wild.c = -40.0;
  for (float v : apply_calibration(big, wild).data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 63.0f);
  }
}

TEST_CASE("tlv: valid-pixel sum and additivity") {
  Raster r = Raster::filled(1, 4, 0.0f);
  r.data = {1.0f, 2.0f, -1.0f, 60.0f};
  CHECK(tlv(r) == doctest::Approx(63.0));

  Rng rng(9);
  Raster a = Raster::filled(8, 8, 0.0f);
  for (auto& v : a.data) v = float(rng.uniform(0.0, 63.0));
  Raster doubled = a;
  for (auto& v : doubled.data) v *= 2.0f;
  CHECK(tlv(doubled) == doctest::Approx(2.0 * tlv(a)).epsilon(1e-9));
}

TEST_CASE("product id validation") {
  CHECK_NOTHROW(validate(ProductId{1992, "F10", Sensor::dmsp}));
  CHECK_NOTHROW(validate(ProductId{2019, "F16", Sensor::dmsp}));
  CHECK_THROWS_AS(validate(ProductId{1991, "F10", Sensor::dmsp}), DataError);
  CHECK_THROWS_AS(validate(ProductId{2020, "F16", Sensor::dmsp}), DataError);
  CHECK_NOTHROW(validate(ProductId{2012, "NPP", Sensor::viirs}));
  CHECK_THROWS_AS(validate(ProductId{2011, "NPP", Sensor::viirs}), DataError);
}

TEST_CASE("fits csv round trip") {
  std::vector<CalibrationFit> fits;
  CalibrationFit f1;
  f1.product = {1992, "F10", Sensor::dmsp};
  f1.a = -0.0107;
  f1.b = 1.6983;
  f1.c = -2.3134;
  f1.r2 = 0.9073;
  CalibrationFit f2;
  f2.product = {1999, "F12", Sensor::dmsp};
  fits = {f1, f2};

  auto tmp = std::filesystem::temp_directory_path() / "ntl_test_fits.csv";
  write_fits_csv(tmp, fits);
  auto back = read_fits_csv(tmp);
  REQUIRE(back.size() == 2);
  CHECK(back[0].product.year == 1992);
  CHECK(back[0].product.satellite == "F10");
  CHECK(back[0].a == f1.a);
  CHECK(back[0].b == f1.b);
  CHECK(back[0].c == f1.c);
  CHECK(back[0].r2 == f1.r2);
  CHECK(back[1].b == 1.0);
  std::filesystem::remove(tmp);
}
