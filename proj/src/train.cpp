#include "ntl/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "ntl/csv.hpp"
#include "ntl/error.hpp"
#include "ntl/ops.hpp"
#include "ntl/rng.hpp"

namespace ntl::train {

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr0 > 0.0)) throw DataError("train config: lr0 must be positive");
  if (!(cfg.decay > 0.0 && cfg.decay < 1.0))
    throw DataError("train config: decay must be in (0, 1)");
  if (cfg.patience < 1) throw DataError("train config: patience must be >= 1");
  if (cfg.batch_size < 1) throw DataError("train config: batch_size must be >= 1");
  if (cfg.epochs < 0) throw DataError("train config: epochs must be >= 0");
}

void adam_step(model::Params<float>& p, AdamState& state, double lr,
               const TrainConfig& cfg) {
  state.step += 1;
  const double t = double(state.step);
  const double corr1 = 1.0 - std::pow(cfg.beta1, t);
  const double corr2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [key, tensor] : p) {
    if (model::is_buffer_key(key)) continue;
    const auto& g = tensor.grad();
    auto& theta = tensor.values();
    if (g.size() != theta.size())
      throw DataError("adam_step: missing gradient for " + key);
    auto& m = state.m[key];
    auto& v = state.v[key];
    if (m.empty()) m.assign(theta.size(), 0.0);
    if (v.empty()) v.assign(theta.size(), 0.0);
    if (m.size() != theta.size() || v.size() != theta.size())
      throw DataError("adam_step: state size mismatch for " + key);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = double(g[i]);
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / corr1;
      const double vhat = v[i] / corr2;
      theta[i] = float(double(theta[i]) - lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
    }
  }
}

double plateau_schedule(const std::vector<double>& history, double lr,
                        const TrainConfig& cfg) {
  if (history.empty()) throw DataError("plateau_schedule: empty history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i)
    if (history[i] < history[best]) best = i;
  const std::size_t stale = history.size() - 1 - best;
  return stale >= std::size_t(cfg.patience) ? lr * cfg.decay : lr;
}

namespace {

float norm_scalar(const model::Params<float>& p, const char* key) {
  const auto it = p.find(key);
  if (it == p.end() || it->second.numel() != 1)
    throw DataError(std::string("train_loop: missing ") + key);
  const float v = it->second.values()[0];
  if (!(v > 0.0f))
    throw DataError(std::string("train_loop: ") + key + " must be positive");
  return v;
}

struct BatchTensors {
  ad::Tensor<float> dmsp_ref;
  ad::Tensor<float> dmsp_tgt;
  ad::Tensor<float> viirs_ref;
  ad::Tensor<float> viirs_tgt;  // normalized target
};

BatchTensors make_batch(const std::vector<dataset::LoadedExample>& set,
                        const std::vector<std::size_t>& order, std::size_t lo,
                        std::size_t hi, const model::ModelConfig& cfg,
                        float dmsp_norm, float viirs_norm) {
  const int n = int(hi - lo);
  const std::size_t lo_px = std::size_t(cfg.h) * cfg.w;
  const std::size_t hi_px = lo_px * 4;
  std::vector<float> dr, dt, vr, vt;
  dr.reserve(n * lo_px);
  dt.reserve(n * lo_px);
  vr.reserve(n * hi_px);
  vt.reserve(n * hi_px);
  for (std::size_t k = lo; k < hi; ++k) {
    const dataset::LoadedExample& e = set[order[k]];
    if (e.dmsp_ref.rows != cfg.h || e.dmsp_ref.cols != cfg.w)
      throw DataError("train_loop: tile shape does not match the model input");
    for (float v : e.dmsp_ref.data) dr.push_back(v / dmsp_norm);
    for (float v : e.dmsp_tgt.data) dt.push_back(v / dmsp_norm);
    for (float v : e.viirs_ref.data) vr.push_back(v / viirs_norm);
    for (float v : e.viirs_tgt.data) vt.push_back(v / viirs_norm);
  }
  BatchTensors b;
  b.dmsp_ref = ad::Tensor<float>::from_values({n, 1, cfg.h, cfg.w}, std::move(dr));
  b.dmsp_tgt = ad::Tensor<float>::from_values({n, 1, cfg.h, cfg.w}, std::move(dt));
  b.viirs_ref =
      ad::Tensor<float>::from_values({n, 1, 2 * cfg.h, 2 * cfg.w}, std::move(vr));
  b.viirs_tgt =
      ad::Tensor<float>::from_values({n, 1, 2 * cfg.h, 2 * cfg.w}, std::move(vt));
  return b;
}

double mean_loss(const std::vector<dataset::LoadedExample>& set,
                 model::Params<float>& params, const model::ModelConfig& mcfg,
                 int batch_size, float dmsp_norm, float viirs_norm) {
  ad::NoGradGuard<float> guard;
  std::vector<std::size_t> order(set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  double sum = 0.0;
  for (std::size_t lo = 0; lo < set.size(); lo += std::size_t(batch_size)) {
    const std::size_t hi = std::min(set.size(), lo + std::size_t(batch_size));
    BatchTensors b =
        make_batch(set, order, lo, hi, mcfg, dmsp_norm, viirs_norm);
    auto out = model::deepntl_forward(b.dmsp_ref, b.dmsp_tgt, b.viirs_ref, params,
                                      mcfg, false);
    auto loss = ad::l1_loss(out, b.viirs_tgt);
    sum += double(loss.values()[0]) * double(hi - lo);
  }
  return sum / double(set.size());
}

}  // namespace

TrainResult train_loop(const std::vector<dataset::LoadedExample>& train_set,
                       const std::vector<dataset::LoadedExample>& val_set,
                       const model::ModelConfig& mcfg, const TrainConfig& tcfg) {
  return train_loop(train_set, val_set, mcfg, tcfg,
                    model::init_params<float>(mcfg, tcfg.seed));
}

TrainResult train_loop(const std::vector<dataset::LoadedExample>& train_set,
                       const std::vector<dataset::LoadedExample>& val_set,
                       const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                       model::Params<float> initial) {
  validate(tcfg);
  model::validate(mcfg);
  if (train_set.empty()) throw DataError("train_loop: empty train split");
  if (val_set.empty()) throw DataError("train_loop: empty val split");

  TrainResult result;
  result.params = std::move(initial);
  if (tcfg.epochs == 0) return result;

  const float dmsp_norm = norm_scalar(result.params, "io.dmsp_norm");
  const float viirs_norm = norm_scalar(result.params, "io.viirs_norm");

  model::Params<float> params = model::clone_params(result.params);
  model::set_trainable(params, true);
  AdamState state;
  double lr = tcfg.lr0;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<double> history;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    // Each epoch's order is a pure function of (seed, epoch).
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle = Rng::substream(tcfg.seed, uint64_t(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[std::size_t(shuffle.uniform_int(0, int(i) - 1))]);

    double train_sum = 0.0;
    int batch_index = 0;
    for (std::size_t lo = 0; lo < order.size();
         lo += std::size_t(tcfg.batch_size), ++batch_index) {
      const std::size_t hi =
          std::min(order.size(), lo + std::size_t(tcfg.batch_size));
      BatchTensors b =
          make_batch(train_set, order, lo, hi, mcfg, dmsp_norm, viirs_norm);
      auto out = model::deepntl_forward(b.dmsp_ref, b.dmsp_tgt, b.viirs_ref,
                                        params, mcfg, true);
      auto loss = ad::l1_loss(out, b.viirs_tgt);
      const double value = double(loss.values()[0]);
      if (!std::isfinite(value))
        throw DataError("train_loop: non-finite loss at epoch " +
                        std::to_string(epoch) + ", batch " +
                        std::to_string(batch_index));
      ad::backward(loss);
      adam_step(params, state, lr, tcfg);
      train_sum += value * double(hi - lo);
    }
    const double train_loss = train_sum / double(train_set.size());

    const double val_loss =
        mean_loss(val_set, params, mcfg, tcfg.batch_size, dmsp_norm, viirs_norm);
    if (!std::isfinite(val_loss))
      throw DataError("train_loop: non-finite validation loss at epoch " +
                      std::to_string(epoch));

    result.log.push_back({epoch, train_loss, val_loss, lr});
    if (val_loss < best_val) {
      best_val = val_loss;
      result.params = model::clone_params(params);
    }
    history.push_back(val_loss);
    lr = plateau_schedule(history, lr, tcfg);
  }
  return result;
}

TrainResult train_loop(const dataset::DatasetManifest& manifest,
                       const std::filesystem::path& root,
                       const model::ModelConfig& mcfg, const TrainConfig& tcfg) {
  auto train_set = dataset::load_examples(manifest, root, "train");
  auto val_set = dataset::load_examples(manifest, root, "val");
  return train_loop(train_set, val_set, mcfg, tcfg);
}

void write_loss_log_csv(const std::filesystem::path& path,
                        const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw DataError("loss log: cannot write " + path.string());
  out << "epoch,train_loss,val_loss,lr\n";
  for (const auto& e : log)
    out << e.epoch << ',' << csv::fmt(e.train_loss) << ',' << csv::fmt(e.val_loss)
        << ',' << csv::fmt(e.lr) << "\n";
  if (!out) throw DataError("loss log: write failed for " + path.string());
}

}  // namespace ntl::train
