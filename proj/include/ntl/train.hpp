#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ntl/dataset.hpp"
#include "ntl/model.hpp"

namespace ntl::train {

struct TrainConfig {
  double lr0 = 1e-4;
  double decay = 0.95;
  int patience = 3;
  int batch_size = 4;
  int epochs = 0;
  uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

void validate(const TrainConfig& cfg);

// First and second moment estimates per trainable parameter, kept in
// 64-bit. Populated lazily on the first step.
struct AdamState {
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
  long step = 0;
};

// Bias-corrected Adam over every trainable parameter. Buffers are left
// alone. Throws when a trainable parameter has no gradient.
void adam_step(model::Params<float>& p, AdamState& state, double lr,
               const TrainConfig& cfg);

// Decays lr once the running-best validation loss is `patience` epochs old;
// during a sustained plateau that fires on every subsequent epoch.
double plateau_schedule(const std::vector<double>& history, double lr,
                        const TrainConfig& cfg);

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // rate used during this epoch
};

struct TrainResult {
  model::Params<float> params;  // snapshot from the best validation epoch
  std::vector<EpochLog> log;
};

// Shuffled mini-batches (per-epoch seeded shuffle, partial final batch
// kept), normalized L1 loss, Adam updates, plateau schedule on the
// validation loss. Validation runs without batch statistics.
TrainResult train_loop(const std::vector<dataset::LoadedExample>& train_set,
                       const std::vector<dataset::LoadedExample>& val_set,
                       const model::ModelConfig& mcfg, const TrainConfig& tcfg);

// Same loop but starting from caller-provided parameters (for example with
// adjusted io.* normalization buffers).
TrainResult train_loop(const std::vector<dataset::LoadedExample>& train_set,
                       const std::vector<dataset::LoadedExample>& val_set,
                       const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                       model::Params<float> initial);

TrainResult train_loop(const dataset::DatasetManifest& manifest,
                       const std::filesystem::path& root,
                       const model::ModelConfig& mcfg, const TrainConfig& tcfg);

// Columns: epoch,train_loss,val_loss,lr.
void write_loss_log_csv(const std::filesystem::path& path,
                        const std::vector<EpochLog>& log);

}  // namespace ntl::train
