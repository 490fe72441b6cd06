#include "ntl/config.hpp"

#include <fstream>

#include "ntl/csv.hpp"
#include "ntl/error.hpp"

namespace ntl::cli {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) throw UsageError("unknown config key: " + key);
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  return csv::to_double(get(key), ("config key " + key).c_str());
}

long RunConfig::get_long(const std::string& key) const {
  return csv::to_long(get(key), ("config key " + key).c_str());
}

int RunConfig::get_int(const std::string& key) const {
  return int(get_long(key));
}

uint64_t RunConfig::get_u64(const std::string& key) const {
  const long v = get_long(key);
  if (v < 0) throw UsageError("config key " + key + " must be non-negative");
  return uint64_t(v);
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "0" || v == "false") return false;
  if (v == "1" || v == "true") return true;
  throw UsageError("config key " + key + " must be 0/1/false/true, got " + v);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values.find(key);
  if (it == values.end()) throw UsageError("unknown config key: " + key);
  it->second = value;
}

RunConfig default_run_config() {
  RunConfig cfg;
  auto& v = cfg.values;
  v["seed"] = "0";
  v["threads"] = "1";

  // Radiance cleaning and inference clamp.
  v["viirs_floor"] = "0.5";
  v["viirs_ceil"] = "496";
  v["ceiling_q"] = "0.9999";

  // Inter-calibration.
  v["spatial_q"] = "0.25";
  v["temporal_q"] = "0.25";
  v["base_year"] = "1999";
  v["base_satellite"] = "F12";

  // Pairing and sampling.
  v["ref_year"] = "2014";
  v["ref_satellite"] = "F15";
  v["tile_h"] = "128";
  v["tile_w"] = "128";
  v["min_lit"] = "0.01";
  v["points"] = "100";
  v["max_attempts"] = "1000";
  v["train_frac"] = "0.95";
  v["by_point"] = "0";
  v["test_years"] = "";

  // Model.
  v["model_h"] = "128";
  v["model_w"] = "128";
  v["model_c"] = "32";
  v["f3_mid"] = "32";
  v["f3_blocks"] = "16";
  v["hstar_mid"] = "32";
  v["hstar_blocks"] = "32";
  v["gstar_mid"] = "64";
  v["gstar_blocks"] = "32";
  v["rcan_dim"] = "64";
  v["rcan_groups"] = "6";
  v["rcan_blocks"] = "6";
  v["rcan_squeeze"] = "16";
  v["dmsp_norm"] = "63";
  v["viirs_norm"] = "64";

  // Training.
  v["lr0"] = "0.0001";
  v["lr_decay"] = "0.95";
  v["patience"] = "3";
  v["batch_size"] = "4";
  v["epochs"] = "30";

  // Synthetic scenes.
  v["synth_rows"] = "64";
  v["synth_cols"] = "64";
  v["synth_years"] = "1";
  v["sat_radiance"] = "200";

  // Inference.
  v["overlap"] = "0";
  return cfg;
}

void overlay_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(lineno) +
                       ": expected key=value, got: " + t);
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig cfg = default_run_config();
  overlay_config_file(cfg, path);
  return cfg;
}

void write_run_config(const std::filesystem::path& path, const RunConfig& cfg,
                      const std::string& command_line) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write config artifact: " + path.string());
  out << "# resolved run configuration\n";
  if (!command_line.empty()) out << "# command: " << command_line << "\n";
  for (const auto& [k, v] : cfg.values) out << k << " = " << v << "\n";
  if (!out) throw DataError("failed writing config artifact: " + path.string());
}

model::ModelConfig model_from(const RunConfig& cfg) {
  return model::make_config(
      cfg.get_int("model_h"), cfg.get_int("model_w"), cfg.get_int("model_c"),
      cfg.get_int("f3_mid"), cfg.get_int("f3_blocks"), cfg.get_int("hstar_mid"),
      cfg.get_int("hstar_blocks"), cfg.get_int("gstar_mid"),
      cfg.get_int("gstar_blocks"), cfg.get_int("rcan_dim"),
      cfg.get_int("rcan_groups"), cfg.get_int("rcan_blocks"),
      cfg.get_int("rcan_squeeze"));
}

train::TrainConfig train_from(const RunConfig& cfg) {
  train::TrainConfig t;
  t.lr0 = cfg.get_double("lr0");
  t.decay = cfg.get_double("lr_decay");
  t.patience = cfg.get_int("patience");
  t.batch_size = cfg.get_int("batch_size");
  t.epochs = cfg.get_int("epochs");
  t.seed = cfg.get_u64("seed");
  train::validate(t);
  return t;
}

}  // namespace ntl::cli
