#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "ntl/model.hpp"
#include "ntl/train.hpp"

namespace ntl::cli {

// Flat key=value run configuration. Every tunable has a default; unknown
// keys are rejected so typos cannot silently fall back.
struct RunConfig {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long get_long(const std::string& key) const;
  int get_int(const std::string& key) const;
  uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
};

RunConfig default_run_config();

// Defaults overlaid with the file's key=value lines. '#' comments and blank
// lines are skipped; keys must already exist in the defaults.
RunConfig load_run_config(const std::filesystem::path& path);
void overlay_config_file(RunConfig& cfg, const std::filesystem::path& path);

// Fully resolved snapshot plus the command line that produced the run.
void write_run_config(const std::filesystem::path& path, const RunConfig& cfg,
                      const std::string& command_line);

model::ModelConfig model_from(const RunConfig& cfg);
train::TrainConfig train_from(const RunConfig& cfg);

}  // namespace ntl::cli
