#include "ntl/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ntl/calib.hpp"
#include "ntl/checkpoint.hpp"
#include "ntl/config.hpp"
#include "ntl/csv.hpp"
#include "ntl/dataset.hpp"
#include "ntl/error.hpp"
#include "ntl/metrics.hpp"
#include "ntl/model.hpp"
#include "ntl/parallel.hpp"
#include "ntl/raster.hpp"
#include "ntl/tiling.hpp"
#include "ntl/train.hpp"

namespace fs = std::filesystem;

namespace ntl::cli {

namespace {

struct ProductRow {
  calib::ProductId id;
  fs::path path;
};

calib::Sensor sensor_from(const std::string& s, const fs::path& file) {
  if (s == "dmsp") return calib::Sensor::dmsp;
  if (s == "viirs") return calib::Sensor::viirs;
  throw DataError(file.string() + ": unknown sensor '" + s +
                  "' (expected dmsp or viirs)");
}

// Rows: year,satellite,sensor,path. Relative paths resolve against the
// CSV's own directory so product lists can move with their rasters.
std::vector<ProductRow> read_products_csv(const fs::path& path) {
  const auto rows = csv::read_rows(path);
  if (rows.empty() || rows.front() != std::vector<std::string>{"year", "satellite",
                                                               "sensor", "path"})
    throw DataError(path.string() + ": expected header year,satellite,sensor,path");
  std::vector<ProductRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 4)
      throw DataError(path.string() + ": row " + std::to_string(i + 1) +
                      " must have 4 fields");
    ProductRow r;
    r.id.year = int(csv::to_long(rows[i][0], "product year"));
    r.id.satellite = rows[i][1];
    r.id.sensor = sensor_from(rows[i][2], path);
    calib::validate(r.id);
    fs::path p = rows[i][3];
    r.path = p.is_absolute() ? p : path.parent_path() / p;
    out.push_back(std::move(r));
  }
  if (out.empty()) throw DataError(path.string() + ": no products listed");
  return out;
}

void write_points_csv(const fs::path& path, const std::vector<TileRef>& points) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "anchor_row,anchor_col,height,width\n";
  for (const auto& p : points)
    out << p.anchor_row << "," << p.anchor_col << "," << p.height << ","
        << p.width << "\n";
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<TileRef> read_points_csv(const fs::path& path) {
  const auto rows = csv::read_rows(path);
  if (rows.empty() || rows.front() != std::vector<std::string>{"anchor_row",
                                                               "anchor_col",
                                                               "height", "width"})
    throw DataError(path.string() +
                    ": expected header anchor_row,anchor_col,height,width");
  std::vector<TileRef> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 4)
      throw DataError(path.string() + ": row " + std::to_string(i + 1) +
                      " must have 4 fields");
    TileRef t;
    t.anchor_row = int(csv::to_long(rows[i][0], "point anchor_row"));
    t.anchor_col = int(csv::to_long(rows[i][1], "point anchor_col"));
    t.height = int(csv::to_long(rows[i][2], "point height"));
    t.width = int(csv::to_long(rows[i][3], "point width"));
    out.push_back(t);
  }
  return out;
}

std::set<int> parse_year_list(const std::string& s) {
  std::set<int> years;
  std::size_t b = 0;
  while (b <= s.size()) {
    std::size_t e = s.find(',', b);
    if (e == std::string::npos) e = s.size();
    const std::string item = s.substr(b, e - b);
    if (!item.empty()) years.insert(int(csv::to_long(item, "year list")));
    b = e + 1;
  }
  return years;
}

std::string join_argv(int argc, const char* const* argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

// Directory runs get DIR/run_config.txt; file outputs get a sibling
// OUT.config.txt. Both record the resolved configuration and command line.
void emit_config_artifact(const fs::path& out, bool out_is_dir,
                          const RunConfig& cfg, const std::string& cmdline) {
  if (out_is_dir)
    write_run_config(out / "run_config.txt", cfg, cmdline);
  else
    write_run_config(out.string() + ".config.txt", cfg, cmdline);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string());
}

void ensure_parent_dir(const fs::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

std::string metric_str(double v) {
  return std::isinf(v) ? "inf" : csv::fmt(v);
}

struct CommonArgs {
  std::string config_path;
  uint64_t seed = 0;
  int threads = 0;
  bool verbose = false;
  int config_count = 0;
  int seed_count = 0;
  int threads_count = 0;
};

RunConfig resolve_config(const CommonArgs& a) {
  RunConfig cfg = default_run_config();
  if (a.config_count) overlay_config_file(cfg, a.config_path);
  if (a.seed_count) cfg.set("seed", std::to_string(a.seed));
  if (a.threads_count) cfg.set("threads", std::to_string(a.threads));
  const int threads = cfg.get_int("threads");
  if (threads < 1) throw UsageError("threads must be >= 1");
  set_thread_budget(threads);
  return cfg;
}

void note(bool verbose, const std::string& msg) {
  if (verbose) std::cerr << msg << "\n";
}

void run_calibrate(const RunConfig& cfg, const CommonArgs& a,
                   const fs::path& stack_csv, const fs::path& out_dir,
                   const std::string& cmdline) {
  const auto rows = read_products_csv(stack_csv);
  calib::CalibrationStack stack;
  for (const auto& r : rows) {
    if (r.id.sensor != calib::Sensor::dmsp)
      throw DataError("calibrate expects DMSP products, got a viirs row for " +
                      std::to_string(r.id.year));
    stack.products.push_back(r.id);
    stack.rasters.push_back(read_ntlr(r.path));
  }
  calib::validate(stack);

  const int base_year = cfg.get_int("base_year");
  const std::string base_sat = cfg.get("base_satellite");
  std::optional<std::size_t> base;
  for (std::size_t i = 0; i < stack.products.size(); ++i)
    if (stack.products[i].year == base_year &&
        stack.products[i].satellite == base_sat)
      base = i;
  if (!base)
    throw DataError("base product " + std::to_string(base_year) + "/" + base_sat +
                    " not present in the stack");

  ensure_dir(out_dir);
  const Mask cf = calib::calibration_fields(stack, cfg.get_double("spatial_q"),
                                            cfg.get_double("temporal_q"));
  Raster cf_raster = Raster::filled(cf.rows, cf.cols, 0.0f);
  cf_raster.x0 = stack.rasters.front().x0;
  cf_raster.y0 = stack.rasters.front().y0;
  cf_raster.dx = stack.rasters.front().dx;
  cf_raster.dy = stack.rasters.front().dy;
  cf_raster.nodata = stack.rasters.front().nodata;
  for (int i = 0; i < cf.rows; ++i)
    for (int j = 0; j < cf.cols; ++j) cf_raster.at(i, j) = float(cf.at(i, j));
  write_ntlr(out_dir / "cf.ntlr", cf_raster);
  note(a.verbose, "wrote " + (out_dir / "cf.ntlr").string());

  std::vector<calib::CalibrationFit> fits;
  for (std::size_t i = 0; i < stack.products.size(); ++i) {
    auto fit = calib::fit_quadratic(stack.rasters[i], stack.rasters[*base], cf);
    fit.product = stack.products[i];
    const fs::path out_path =
        out_dir / ("calibrated_" + std::to_string(stack.products[i].year) + "_" +
                   stack.products[i].satellite + ".ntlr");
    write_ntlr(out_path, calib::apply_calibration(stack.rasters[i], fit));
    note(a.verbose, "wrote " + out_path.string());
    fits.push_back(std::move(fit));
  }
  calib::write_fits_csv(out_dir / "fits.csv", fits);
  note(a.verbose, "wrote " + (out_dir / "fits.csv").string());
  emit_config_artifact(out_dir, true, cfg, cmdline);
}

void run_tlv(const RunConfig& cfg, const CommonArgs& a, const fs::path& stack_csv,
             const fs::path& out_file, const std::string& cmdline) {
  const auto rows = read_products_csv(stack_csv);
  std::vector<calib::TlvRow> out;
  for (const auto& r : rows)
    out.push_back({r.id, calib::tlv(read_ntlr(r.path))});
  ensure_parent_dir(out_file);
  calib::write_tlv_csv(out_file, out);
  note(a.verbose, "wrote " + out_file.string());
  emit_config_artifact(out_file, false, cfg, cmdline);
}

void run_sample(const RunConfig& cfg, const CommonArgs& a, const fs::path& dmsp_path,
                const fs::path& viirs_path, const fs::path& out_file,
                const std::string& cmdline) {
  const Raster dmsp = read_ntlr(dmsp_path);
  const Raster viirs = read_ntlr(viirs_path);
  const auto points = dataset::sample_points(
      dmsp, viirs, cfg.get_int("points"), cfg.get_double("min_lit"),
      cfg.get_int("tile_h"), cfg.get_int("tile_w"), cfg.get_u64("seed"),
      cfg.get_int("max_attempts"));
  ensure_parent_dir(out_file);
  write_points_csv(out_file, points);
  note(a.verbose, "wrote " + out_file.string());
  emit_config_artifact(out_file, false, cfg, cmdline);
}

void run_dataset_build(const RunConfig& cfg, const CommonArgs& a,
                       const fs::path& points_csv, const fs::path& ref_dmsp_path,
                       const fs::path& ref_viirs_path, const fs::path& targets_csv,
                       const fs::path& out_dir, const std::string& cmdline) {
  const auto points = read_points_csv(points_csv);
  const Raster ref_dmsp = read_ntlr(ref_dmsp_path);
  const Raster ref_viirs = read_ntlr(ref_viirs_path);

  // Each target year contributes one DMSP row and one VIIRS row.
  const auto rows = read_products_csv(targets_csv);
  std::map<int, dataset::TargetProduct> by_year;
  std::map<int, std::pair<bool, bool>> seen;
  for (const auto& r : rows) {
    auto& t = by_year[r.id.year];
    auto& got = seen[r.id.year];
    if (r.id.sensor == calib::Sensor::dmsp) {
      if (got.first)
        throw DataError(targets_csv.string() + ": duplicate dmsp row for year " +
                        std::to_string(r.id.year));
      t.product = r.id;
      t.dmsp = read_ntlr(r.path);
      got.first = true;
    } else {
      if (got.second)
        throw DataError(targets_csv.string() + ": duplicate viirs row for year " +
                        std::to_string(r.id.year));
      t.viirs = read_ntlr(r.path);
      got.second = true;
    }
  }
  std::vector<dataset::TargetProduct> targets;
  for (auto& [year, t] : by_year) {
    const auto& got = seen[year];
    if (!got.first || !got.second)
      throw DataError(targets_csv.string() + ": year " + std::to_string(year) +
                      " needs both a dmsp and a viirs row");
    targets.push_back(std::move(t));
  }

  ensure_dir(out_dir);
  auto manifest = dataset::build_examples(points, ref_dmsp, ref_viirs, targets,
                                          out_dir);
  manifest.seed = cfg.get_u64("seed");
  dataset::write_manifest_csv(out_dir / "manifest.csv", manifest);
  note(a.verbose, "wrote " + (out_dir / "manifest.csv").string());
  emit_config_artifact(out_dir, true, cfg, cmdline);
}

void run_dataset_split(const RunConfig& cfg, const CommonArgs& a,
                       const fs::path& manifest_csv, const fs::path& out_file,
                       const std::string& test_years, const std::string& cmdline) {
  auto manifest = dataset::read_manifest_csv(manifest_csv);
  const auto years = parse_year_list(test_years);
  if (!years.empty()) dataset::mark_test_years(manifest, years);
  auto split = dataset::split_manifest(manifest, cfg.get_double("train_frac"),
                                       cfg.get_u64("seed"), cfg.get_bool("by_point"));
  ensure_parent_dir(out_file);
  dataset::write_manifest_csv(out_file, split);
  note(a.verbose, "wrote " + out_file.string());
  emit_config_artifact(out_file, false, cfg, cmdline);
}

void run_synth(const RunConfig& cfg, const CommonArgs& a, const fs::path& out_dir,
               const std::string& cmdline) {
  const uint64_t seed = cfg.get_u64("seed");
  const int rows = cfg.get_int("synth_rows");
  const int cols = cfg.get_int("synth_cols");
  const int years = cfg.get_int("synth_years");
  const double sat = cfg.get_double("sat_radiance");
  ensure_dir(out_dir);

  if (years <= 1) {
    const auto scene = dataset::synth_scene_full(seed, rows, cols, sat);
    write_ntlr(out_dir / "dmsp.ntlr", scene.dmsp);
    write_ntlr(out_dir / "viirs.ntlr", scene.viirs);
    note(a.verbose, "wrote dmsp.ntlr and viirs.ntlr under " + out_dir.string());
  } else {
    const auto series = dataset::synth_series(seed, rows, cols, years, sat);
    write_ntlr(out_dir / "ref_dmsp.ntlr", series.ref_dmsp);
    write_ntlr(out_dir / "ref_viirs.ntlr", series.ref_viirs);
    std::ofstream products(out_dir / "products.csv", std::ios::trunc);
    if (!products) throw DataError("cannot write products.csv");
    products << "year,satellite,sensor,path\n";
    for (const auto& t : series.targets) {
      const std::string y = std::to_string(t.product.year);
      write_ntlr(out_dir / ("dmsp_" + y + ".ntlr"), t.dmsp);
      write_ntlr(out_dir / ("viirs_" + y + ".ntlr"), t.viirs);
      products << y << "," << t.product.satellite << ",dmsp,dmsp_" << y
               << ".ntlr\n";
      products << y << ",NPP,viirs,viirs_" << y << ".ntlr\n";
    }
    if (!products) throw DataError("failed writing products.csv");
    note(a.verbose, "wrote a " + std::to_string(years) + "-year series under " +
                        out_dir.string());
  }
  emit_config_artifact(out_dir, true, cfg, cmdline);
}

void run_train(const RunConfig& cfg, const CommonArgs& a,
               const fs::path& manifest_csv, const fs::path& root,
               const fs::path& out_dir, const std::string& cmdline) {
  const auto manifest = dataset::read_manifest_csv(manifest_csv);
  const auto mcfg = model_from(cfg);
  const auto tcfg = train_from(cfg);

  auto initial = model::init_params<float>(mcfg, tcfg.seed);
  model::param(initial, "io.dmsp_norm").values()[0] =
      float(cfg.get_double("dmsp_norm"));
  model::param(initial, "io.viirs_norm").values()[0] =
      float(cfg.get_double("viirs_norm"));

  const auto train_set = dataset::load_examples(manifest, root, "train");
  const auto val_set = dataset::load_examples(manifest, root, "val");
  const auto result =
      train::train_loop(train_set, val_set, mcfg, tcfg, std::move(initial));

  ensure_dir(out_dir);
  model::save_checkpoint((out_dir / "model.ntlc").string(), result.params, mcfg);
  train::write_loss_log_csv(out_dir / "loss_log.csv", result.log);
  note(a.verbose, "wrote model.ntlc and loss_log.csv under " + out_dir.string());
  emit_config_artifact(out_dir, true, cfg, cmdline);
}

void run_infer(const RunConfig& cfg, const CommonArgs& a,
               const fs::path& checkpoint, const fs::path& dmsp_ref_path,
               const fs::path& dmsp_tgt_path, const fs::path& viirs_ref_path,
               const fs::path& out_file, const std::string& cmdline) {
  auto [params, mcfg] = model::load_checkpoint(checkpoint.string());
  const Raster dmsp_ref = read_ntlr(dmsp_ref_path);
  const Raster dmsp_tgt = read_ntlr(dmsp_tgt_path);
  const Raster viirs_ref = read_ntlr(viirs_ref_path);
  const Raster out =
      pipeline::reconstruct_year(params, mcfg, dmsp_ref, dmsp_tgt, viirs_ref,
                                 cfg.get_double("viirs_ceil"), cfg.get_int("overlap"));
  ensure_parent_dir(out_file);
  write_ntlr(out_file, out);
  note(a.verbose, "wrote " + out_file.string());
  emit_config_artifact(out_file, false, cfg, cmdline);
}

void run_eval(const RunConfig& cfg, const CommonArgs& a, const fs::path& gt_path,
              const fs::path& sr_path, const std::string& label,
              const fs::path& out_file, const std::string& cmdline) {
  const Raster gt = read_ntlr(gt_path);
  const Raster sr = read_ntlr(sr_path);
  const auto report = metrics::evaluate_pair(gt, sr, cfg.get_double("viirs_ceil"));
  std::cout << "r=" << metric_str(report.r) << " psnr=" << metric_str(report.psnr)
            << " ssim=" << metric_str(report.ssim) << " n=" << report.n
            << " max=" << metric_str(report.max_used) << "\n";
  if (!out_file.empty()) {
    ensure_parent_dir(out_file);
    metrics::write_metrics_csv(out_file, {{label, report}});
    note(a.verbose, "wrote " + out_file.string());
    emit_config_artifact(out_file, false, cfg, cmdline);
  }
}

void run_baseline_bilinear(const RunConfig& cfg, const CommonArgs& a,
                           const fs::path& in_path, const fs::path& out_file,
                           const std::string& cmdline) {
  const Raster up = pipeline::bilinear_upsample2x(read_ntlr(in_path));
  ensure_parent_dir(out_file);
  write_ntlr(out_file, up);
  note(a.verbose, "wrote " + out_file.string());
  emit_config_artifact(out_file, false, cfg, cmdline);
}

void run_pgm(const RunConfig& cfg, const CommonArgs& a, const fs::path& in_path,
             const fs::path& out_file, const std::string& cmdline) {
  ensure_parent_dir(out_file);
  write_pgm16(out_file, read_ntlr(in_path));
  note(a.verbose, "wrote " + out_file.string());
  emit_config_artifact(out_file, false, cfg, cmdline);
}

}  // namespace

int run(int argc, const char* const* argv) {
  const std::string cmdline = join_argv(argc, argv);
  CLI::App app{"nighttime-light reconstruction toolkit"};
  app.name("ntl");
  app.require_subcommand(1);
  app.fallthrough();

  CommonArgs common;
  auto* config_opt = app.add_option("--config", common.config_path,
                                    "key=value configuration file");
  auto* seed_opt =
      app.add_option("--seed", common.seed, "seed overriding the config value");
  auto* threads_opt =
      app.add_option("--threads", common.threads, "worker thread budget");
  app.add_flag("--verbose", common.verbose, "narrate outputs on stderr");

  auto* calibrate = app.add_subcommand(
      "calibrate", "fit the DMSP stack onto the base product and rewrite it");
  std::string cal_stack, cal_out;
  calibrate->add_option("--stack", cal_stack, "products CSV")->required();
  calibrate->add_option("--out", cal_out, "output directory")->required();

  auto* tlv_cmd = app.add_subcommand("tlv", "total lit volume per product");
  std::string tlv_stack, tlv_out;
  tlv_cmd->add_option("--stack", tlv_stack, "products CSV")->required();
  tlv_cmd->add_option("--out", tlv_out, "output CSV")->required();

  auto* sample = app.add_subcommand("sample", "draw lit tile anchors");
  std::string smp_dmsp, smp_viirs, smp_out;
  int smp_n = 0, smp_tile_h = 0, smp_tile_w = 0;
  double smp_min_lit = 0.0;
  sample->add_option("--dmsp", smp_dmsp, "reference DMSP raster")->required();
  sample->add_option("--viirs", smp_viirs, "reference VIIRS raster")->required();
  sample->add_option("--out", smp_out, "points CSV")->required();
  auto* smp_n_opt = sample->add_option("--n", smp_n, "number of points");
  auto* smp_lit_opt = sample->add_option("--min-lit", smp_min_lit,
                                         "minimum lit fraction per tile");
  auto* smp_th_opt = sample->add_option("--tile-h", smp_tile_h, "tile height");
  auto* smp_tw_opt = sample->add_option("--tile-w", smp_tile_w, "tile width");

  auto* ds = app.add_subcommand("dataset", "paired-tile dataset operations");
  ds->require_subcommand(1);
  auto* build = ds->add_subcommand("build", "cut tiles and write the manifest");
  std::string b_points, b_ref_dmsp, b_ref_viirs, b_targets, b_out;
  build->add_option("--points", b_points, "points CSV")->required();
  build->add_option("--ref-dmsp", b_ref_dmsp, "reference DMSP raster")->required();
  build->add_option("--ref-viirs", b_ref_viirs, "reference VIIRS raster")
      ->required();
  build->add_option("--targets", b_targets, "target products CSV")->required();
  build->add_option("--out", b_out, "dataset root directory")->required();
  auto* split = ds->add_subcommand("split", "assign train/val/test labels");
  std::string sp_manifest, sp_out, sp_test_years;
  double sp_frac = 0.0;
  bool sp_by_point = false;
  split->add_option("--manifest", sp_manifest, "manifest CSV")->required();
  split->add_option("--out", sp_out, "output manifest CSV")->required();
  auto* sp_frac_opt =
      split->add_option("--train-frac", sp_frac, "train fraction of non-test");
  auto* sp_years_opt = split->add_option("--test-years", sp_test_years,
                                         "comma-separated held-out years");
  auto* sp_bp_opt = split->add_flag("--by-point", sp_by_point,
                                    "keep all years of an anchor together");

  auto* synth = app.add_subcommand("synth", "generate a synthetic scene or series");
  int sy_rows = 0, sy_cols = 0, sy_years = 0;
  std::string sy_out;
  auto* sy_rows_opt = synth->add_option("--rows", sy_rows, "DMSP rows");
  auto* sy_cols_opt = synth->add_option("--cols", sy_cols, "DMSP cols");
  auto* sy_years_opt =
      synth->add_option("--years", sy_years, "series length (1 = single scene)");
  synth->add_option("--out", sy_out, "output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "train from a dataset manifest");
  std::string tr_manifest, tr_root, tr_out;
  int tr_epochs = 0, tr_batch = 0;
  double tr_lr0 = 0.0;
  train_cmd->add_option("--manifest", tr_manifest, "manifest CSV")->required();
  train_cmd->add_option("--root", tr_root, "dataset root directory")->required();
  train_cmd->add_option("--out", tr_out, "output directory")->required();
  auto* tr_epochs_opt = train_cmd->add_option("--epochs", tr_epochs, "epoch count");
  auto* tr_batch_opt = train_cmd->add_option("--batch-size", tr_batch, "batch size");
  auto* tr_lr_opt = train_cmd->add_option("--lr0", tr_lr0, "initial learning rate");

  auto* infer = app.add_subcommand("infer", "reconstruct one year with a checkpoint");
  std::string in_ckpt, in_dmsp_ref, in_dmsp_tgt, in_viirs_ref, in_out;
  int in_overlap = 0;
  infer->add_option("--checkpoint", in_ckpt, "model checkpoint")->required();
  infer->add_option("--dmsp-ref", in_dmsp_ref, "reference DMSP raster")->required();
  infer->add_option("--dmsp-tgt", in_dmsp_tgt, "target-year DMSP raster")
      ->required();
  infer->add_option("--viirs-ref", in_viirs_ref, "reference VIIRS raster")
      ->required();
  infer->add_option("--out", in_out, "output raster")->required();
  auto* in_overlap_opt =
      infer->add_option("--overlap", in_overlap, "overlap-and-average window step");

  auto* eval = app.add_subcommand("eval", "compare a reconstruction to ground truth");
  std::string ev_gt, ev_sr, ev_label = "pair", ev_out;
  double ev_max = 0.0;
  eval->add_option("--gt", ev_gt, "ground-truth raster")->required();
  eval->add_option("--sr", ev_sr, "reconstruction raster")->required();
  eval->add_option("--label", ev_label, "row label for the CSV");
  eval->add_option("--out", ev_out, "optional metrics CSV");
  auto* ev_max_opt = eval->add_option("--max", ev_max, "dynamic range ceiling");

  auto* baseline = app.add_subcommand("baseline", "reference upsamplers");
  baseline->require_subcommand(1);
  auto* bilinear = baseline->add_subcommand("bilinear", "2x bilinear upsample");
  std::string bl_in, bl_out;
  bilinear->add_option("--in", bl_in, "input raster")->required();
  bilinear->add_option("--out", bl_out, "output raster")->required();

  auto* pgm = app.add_subcommand("pgm", "16-bit PGM export with a scale sidecar");
  std::string pg_in, pg_out;
  pgm->add_option("--in", pg_in, "input raster")->required();
  pgm->add_option("--out", pg_out, "output PGM path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    common.config_count = int(config_opt->count());
    common.seed_count = int(seed_opt->count());
    common.threads_count = int(threads_opt->count());
    RunConfig cfg = resolve_config(common);

    if (*calibrate) {
      run_calibrate(cfg, common, cal_stack, cal_out, cmdline);
    } else if (*tlv_cmd) {
      run_tlv(cfg, common, tlv_stack, tlv_out, cmdline);
    } else if (*sample) {
      if (smp_n_opt->count()) cfg.set("points", std::to_string(smp_n));
      if (smp_lit_opt->count()) cfg.set("min_lit", csv::fmt(smp_min_lit));
      if (smp_th_opt->count()) cfg.set("tile_h", std::to_string(smp_tile_h));
      if (smp_tw_opt->count()) cfg.set("tile_w", std::to_string(smp_tile_w));
      run_sample(cfg, common, smp_dmsp, smp_viirs, smp_out, cmdline);
    } else if (*ds) {
      if (*build) {
        run_dataset_build(cfg, common, b_points, b_ref_dmsp, b_ref_viirs,
                          b_targets, b_out, cmdline);
      } else {
        if (sp_frac_opt->count()) cfg.set("train_frac", csv::fmt(sp_frac));
        if (sp_bp_opt->count()) cfg.set("by_point", sp_by_point ? "1" : "0");
        const std::string years =
            sp_years_opt->count() ? sp_test_years : cfg.get("test_years");
        if (sp_years_opt->count()) cfg.set("test_years", years);
        run_dataset_split(cfg, common, sp_manifest, sp_out, years, cmdline);
      }
    } else if (*synth) {
      if (sy_rows_opt->count()) cfg.set("synth_rows", std::to_string(sy_rows));
      if (sy_cols_opt->count()) cfg.set("synth_cols", std::to_string(sy_cols));
      if (sy_years_opt->count()) cfg.set("synth_years", std::to_string(sy_years));
      run_synth(cfg, common, sy_out, cmdline);
    } else if (*train_cmd) {
      if (tr_epochs_opt->count()) cfg.set("epochs", std::to_string(tr_epochs));
      if (tr_batch_opt->count()) cfg.set("batch_size", std::to_string(tr_batch));
      if (tr_lr_opt->count()) cfg.set("lr0", csv::fmt(tr_lr0));
      run_train(cfg, common, tr_manifest, tr_root, tr_out, cmdline);
    } else if (*infer) {
      if (in_overlap_opt->count()) cfg.set("overlap", std::to_string(in_overlap));
      run_infer(cfg, common, in_ckpt, in_dmsp_ref, in_dmsp_tgt, in_viirs_ref,
                in_out, cmdline);
    } else if (*eval) {
      if (ev_max_opt->count()) cfg.set("viirs_ceil", csv::fmt(ev_max));
      run_eval(cfg, common, ev_gt, ev_sr, ev_label, ev_out, cmdline);
    } else if (*baseline) {
      run_baseline_bilinear(cfg, common, bl_in, bl_out, cmdline);
    } else if (*pgm) {
      run_pgm(cfg, common, pg_in, pg_out, cmdline);
    } else {
      throw UsageError("no subcommand selected");
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace ntl::cli
