#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ntl/error.hpp"
#include "ntl/ops.hpp"
#include "ntl/rng.hpp"
#include "ntl/tensor.hpp"

namespace ntl::model {

// One stacked-residual-block network: S ResBlocks, a long skip from the
// network input to the last block's output, then a Conv+Norm+ReLU tail.
struct ResnetConfig {
  int inpC = 1;
  int midC = 1;
  int outC = 1;
  int S = 1;
};

// Channel-attention super-resolution network: G residual groups of B
// attention blocks each, sub-pixel upscale by 2, reconstruction to 1 channel.
struct RcanConfig {
  int dim = 1;
  int G = 1;
  int B = 1;
  int e = 1;
};

struct ModelConfig {
  int h = 0;  // low-res tile height; output is 2h x 2w
  int w = 0;
  int c = 0;  // feature channels at the fusion point
  ResnetConfig f3;
  ResnetConfig hstar;
  ResnetConfig gstar;
  RcanConfig f1;
};

inline void validate(const ModelConfig& cfg) {
  auto bad = [](const std::string& what) { throw DataError("model config: " + what); };
  if (cfg.h < 1 || cfg.w < 1) bad("h and w must be positive");
  if (cfg.c < 1) bad("c must be positive");
  auto check_net = [&](const ResnetConfig& r, const char* name) {
    if (r.inpC < 1 || r.midC < 1 || r.outC < 1 || r.S < 1)
      bad(std::string(name) + " channel counts and depth must be positive");
  };
  check_net(cfg.f3, "f3");
  check_net(cfg.hstar, "hstar");
  check_net(cfg.gstar, "gstar");
  if (cfg.f3.inpC != 1) bad("f3.inpC must be 1");
  if (cfg.hstar.inpC != 2) bad("hstar.inpC must be 2");
  if (cfg.gstar.inpC != 2 * cfg.c) bad("gstar.inpC must be 2c");
  if (cfg.gstar.outC != 1) bad("gstar.outC must be 1");
  if (cfg.f3.outC != cfg.c) bad("f3.outC must equal c");
  if (cfg.hstar.outC != cfg.c) bad("hstar.outC must equal c");
  if (cfg.f1.dim < 1 || cfg.f1.G < 1 || cfg.f1.B < 1 || cfg.f1.e < 1)
    bad("f1 fields must be positive");
  if (cfg.f1.dim % cfg.f1.e != 0) bad("f1.dim must be divisible by f1.e");
}

inline ModelConfig make_config(int h, int w, int c, int f3_midC, int f3_S,
                               int hstar_midC, int hstar_S, int gstar_midC,
                               int gstar_S, int dim, int G, int B, int e) {
  ModelConfig cfg;
  cfg.h = h;
  cfg.w = w;
  cfg.c = c;
  cfg.f3 = {1, f3_midC, c, f3_S};
  cfg.hstar = {2, hstar_midC, c, hstar_S};
  cfg.gstar = {2 * c, gstar_midC, 1, gstar_S};
  cfg.f1 = {dim, G, B, e};
  validate(cfg);
  return cfg;
}

inline ModelConfig toy_config() {
  return make_config(4, 4, 2, 4, 1, 4, 1, 4, 1, 4, 1, 1, 2);
}

inline ModelConfig production_config() {
  return make_config(128, 128, 32, 32, 16, 32, 32, 64, 32, 64, 6, 6, 16);
}

template <class T>
using Params = std::map<std::string, ad::Tensor<T>>;

// Running statistics and the io.* scaling constants ride along in
// checkpoints but are never updated by the optimizer.
inline bool is_buffer_key(const std::string& key) {
  auto ends_with = [&](const char* suf) {
    std::size_t n = std::char_traits<char>::length(suf);
    return key.size() >= n && key.compare(key.size() - n, n, suf) == 0;
  };
  return ends_with(".running_mean") || ends_with(".running_var") ||
         key.rfind("io.", 0) == 0;
}

template <class T>
ad::Tensor<T>& param(Params<T>& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) throw DataError("params: missing key " + key);
  return it->second;
}

template <class T>
void set_trainable(Params<T>& p, bool on) {
  for (auto& [key, t] : p)
    if (!is_buffer_key(key)) t.set_requires_grad(on);
}

// Deep copy: fresh storage, no graph history, requires_grad cleared.
template <class T>
Params<T> clone_params(const Params<T>& p) {
  Params<T> out;
  for (const auto& [key, t] : p)
    out.emplace(key, ad::Tensor<T>::from_values(t.shape(), t.values()));
  return out;
}

// Parameter shape table. Kind Conv draws uniform(-1/sqrt(fan_in), +...);
// Const fills with `value`.
struct ParamSpec {
  std::vector<int> shape;
  bool conv_weight = false;
  double value = 0.0;
};

using ParamTable = std::map<std::string, ParamSpec>;

namespace detail {

inline void add_conv(ParamTable& t, const std::string& prefix, int outC, int inC,
                     int k, bool bias = true) {
  t[prefix + ".w"] = {{outC, inC, k, k}, true, 0.0};
  if (bias) t[prefix + ".b"] = {{outC}, false, 0.0};
}

inline void add_norm(ParamTable& t, const std::string& prefix, int C) {
  t[prefix + ".gamma"] = {{C}, false, 1.0};
  t[prefix + ".beta"] = {{C}, false, 0.0};
  t[prefix + ".running_mean"] = {{C}, false, 0.0};
  t[prefix + ".running_var"] = {{C}, false, 1.0};
}

inline void add_resnet(ParamTable& t, const std::string& name,
                       const ResnetConfig& cfg) {
  for (int s = 1; s <= cfg.S; ++s) {
    const std::string blk = name + ".block" + std::to_string(s);
    const int inC = (s == 1) ? cfg.inpC : cfg.midC;
    add_conv(t, blk + ".conv1", cfg.midC, inC, 3);
    add_norm(t, blk + ".norm1", cfg.midC);
    add_conv(t, blk + ".conv2", cfg.midC, cfg.midC, 3);
    add_norm(t, blk + ".norm2", cfg.midC);
    if (s == 1 && cfg.inpC != cfg.midC)
      add_conv(t, blk + ".skip_conv", cfg.midC, cfg.inpC, 3);
  }
  if (cfg.inpC != cfg.midC)
    add_conv(t, name + ".long_skip_conv", cfg.midC, cfg.inpC, 3);
  add_conv(t, name + ".tail.conv", cfg.outC, cfg.midC, 3);
  add_norm(t, name + ".tail.norm", cfg.outC);
}

inline void add_rcan(ParamTable& t, const std::string& name, const RcanConfig& cfg) {
  add_conv(t, name + ".shallow.conv", cfg.dim, 1, 3);
  for (int g = 1; g <= cfg.G; ++g) {
    const std::string rg = name + ".rg" + std::to_string(g);
    for (int b = 1; b <= cfg.B; ++b) {
      const std::string rcab = rg + ".rcab" + std::to_string(b);
      add_conv(t, rcab + ".conv", cfg.dim, cfg.dim, 3);
      add_conv(t, rcab + ".ca.fc1", cfg.dim / cfg.e, cfg.dim, 1);
      add_conv(t, rcab + ".ca.fc2", cfg.dim, cfg.dim / cfg.e, 1);
    }
    add_conv(t, rg + ".tail_conv", cfg.dim, cfg.dim, 3);
  }
  add_conv(t, name + ".body_conv", cfg.dim, cfg.dim, 3);
  add_conv(t, name + ".upscale.conv", 4 * cfg.dim, cfg.dim, 3);
  add_conv(t, name + ".recon.conv", 1, cfg.dim, 3);
}

}  // namespace detail

// linear_prototype swaps the fused gstar for a 1x1 difference transform (h)
// and a c-input reconstruction net (g); everything else is shared.
inline ParamTable param_table(const ModelConfig& cfg, bool linear_prototype = false) {
  validate(cfg);
  ParamTable t;
  detail::add_rcan(t, "f1", cfg.f1);
  detail::add_resnet(t, "f3", cfg.f3);
  if (linear_prototype) {
    t["h.w"] = {{cfg.c, 1, 1, 1}, true, 0.0};  // bias-free so h(0) == 0 exactly
    detail::add_resnet(t, "g", {cfg.c, cfg.gstar.midC, 1, cfg.gstar.S});
  } else {
    detail::add_resnet(t, "hstar", cfg.hstar);
    detail::add_resnet(t, "gstar", cfg.gstar);
  }
  t["io.dmsp_norm"] = {{1}, false, 63.0};
  t["io.viirs_norm"] = {{1}, false, 64.0};
  return t;
}

template <class T>
Params<T> init_from_table(const ParamTable& table, uint64_t seed) {
  Rng rng(seed);
  Params<T> p;
  for (const auto& [key, spec] : table) {
    auto t = ad::Tensor<T>::zeros(spec.shape);
    if (spec.conv_weight) {
      const double fan_in =
          double(spec.shape[1]) * double(spec.shape[2]) * double(spec.shape[3]);
      const double bound = 1.0 / std::sqrt(fan_in);
      for (auto& v : t.values()) v = T(rng.uniform(-bound, bound));
    } else if (spec.value != 0.0) {
      for (auto& v : t.values()) v = T(spec.value);
    }
    p.emplace(key, std::move(t));
  }
  return p;
}

template <class T>
Params<T> init_params(const ModelConfig& cfg, uint64_t seed) {
  return init_from_table<T>(param_table(cfg, false), seed);
}

template <class T>
Params<T> init_linear_prototype_params(const ModelConfig& cfg, uint64_t seed) {
  return init_from_table<T>(param_table(cfg, true), seed);
}

namespace detail {

template <class T>
ad::Tensor<T> conv_block(const ad::Tensor<T>& x, Params<T>& p,
                         const std::string& prefix) {
  return ad::conv2d(x, param(p, prefix + ".w"), param(p, prefix + ".b"), 1,
                    param(p, prefix + ".w").dim(2) / 2);
}

template <class T>
ad::Tensor<T> norm_block(const ad::Tensor<T>& x, Params<T>& p,
                         const std::string& prefix, bool training) {
  return ad::batch_norm(x, param(p, prefix + ".gamma"), param(p, prefix + ".beta"),
                        param(p, prefix + ".running_mean"),
                        param(p, prefix + ".running_var"), training);
}

}  // namespace detail

template <class T>
ad::Tensor<T> resnet_forward(const ad::Tensor<T>& x, Params<T>& p,
                             const std::string& name, const ResnetConfig& cfg,
                             bool training) {
  if (x.rank() != 4 || x.dim(1) != cfg.inpC)
    throw DataError(name + ": expected input with " + std::to_string(cfg.inpC) +
                    " channels");
  ad::Tensor<T> t = x;
  for (int s = 1; s <= cfg.S; ++s) {
    const std::string blk = name + ".block" + std::to_string(s);
    auto y = detail::conv_block(t, p, blk + ".conv1");
    y = detail::norm_block(y, p, blk + ".norm1", training);
    y = ad::relu(y);
    y = detail::conv_block(y, p, blk + ".conv2");
    y = detail::norm_block(y, p, blk + ".norm2", training);
    auto skip = (s == 1 && cfg.inpC != cfg.midC)
                    ? detail::conv_block(t, p, blk + ".skip_conv")
                    : t;
    t = ad::relu(ad::add(skip, y));
  }
  auto shortcut = (cfg.inpC != cfg.midC)
                      ? detail::conv_block(x, p, name + ".long_skip_conv")
                      : x;
  t = ad::add(shortcut, t);
  t = detail::conv_block(t, p, name + ".tail.conv");
  t = detail::norm_block(t, p, name + ".tail.norm", training);
  return ad::relu(t);
}

template <class T>
ad::Tensor<T> channel_attention(const ad::Tensor<T>& x, Params<T>& p,
                                const std::string& prefix, int e) {
  if (x.dim(1) % e != 0)
    throw DataError(prefix + ": channel count not divisible by reduction ratio");
  auto s = ad::global_avg_pool(x);
  s = ad::conv2d(s, param(p, prefix + ".fc1.w"), param(p, prefix + ".fc1.b"));
  s = ad::relu(s);
  s = ad::conv2d(s, param(p, prefix + ".fc2.w"), param(p, prefix + ".fc2.b"));
  s = ad::sigmoid(s);
  return ad::mul_channels(x, s);
}

template <class T>
ad::Tensor<T> rcan_forward(const ad::Tensor<T>& x, Params<T>& p,
                           const std::string& name, const RcanConfig& cfg,
                           bool training) {
  (void)training;  // no normalization layers in this network
  if (x.rank() != 4 || x.dim(1) != 1)
    throw DataError(name + ": expected single-channel input");
  auto shallow = detail::conv_block(x, p, name + ".shallow.conv");
  auto t = shallow;
  for (int g = 1; g <= cfg.G; ++g) {
    const std::string rg = name + ".rg" + std::to_string(g);
    auto group_in = t;
    auto u = t;
    for (int b = 1; b <= cfg.B; ++b) {
      const std::string rcab = rg + ".rcab" + std::to_string(b);
      auto v = detail::conv_block(u, p, rcab + ".conv");
      v = channel_attention(v, p, rcab + ".ca", cfg.e);
      u = ad::add(u, v);
    }
    u = detail::conv_block(u, p, rg + ".tail_conv");
    t = ad::add(group_in, u);
  }
  t = detail::conv_block(t, p, name + ".body_conv");
  t = ad::add(shallow, t);
  t = detail::conv_block(t, p, name + ".upscale.conv");
  t = ad::pixel_shuffle(t, 2);
  return detail::conv_block(t, p, name + ".recon.conv");
}

namespace detail {

template <class T>
void check_stage(const ad::Tensor<T>& t, const char* stage, int N, int C, int H,
                 int W) {
  if (t.rank() != 4 || t.dim(0) != N || t.dim(1) != C || t.dim(2) != H ||
      t.dim(3) != W)
    throw DataError(std::string(stage) + ": expected shape (" + std::to_string(N) +
                    "," + std::to_string(C) + "," + std::to_string(H) + "," +
                    std::to_string(W) + ")");
}

}  // namespace detail

// Annual-difference super-resolution: two low-res inputs share one feature
// extractor, their fused difference steers the high-res reference.
template <class T>
ad::Tensor<T> deepntl_forward(const ad::Tensor<T>& dmsp_ref,
                              const ad::Tensor<T>& dmsp_tgt,
                              const ad::Tensor<T>& viirs_ref, Params<T>& p,
                              const ModelConfig& cfg, bool training) {
  if (dmsp_ref.rank() != 4) throw DataError("dmsp_ref: expected rank-4 tensor");
  const int N = dmsp_ref.dim(0);
  detail::check_stage(dmsp_ref, "dmsp_ref", N, 1, cfg.h, cfg.w);
  detail::check_stage(dmsp_tgt, "dmsp_tgt", N, 1, cfg.h, cfg.w);
  detail::check_stage(viirs_ref, "viirs_ref", N, 1, 2 * cfg.h, 2 * cfg.w);

  auto feat_ref = rcan_forward(dmsp_ref, p, "f1", cfg.f1, training);
  auto feat_tgt = rcan_forward(dmsp_tgt, p, "f1", cfg.f1, training);
  auto pair = ad::concat_channels(feat_ref, feat_tgt);
  auto diff = resnet_forward(pair, p, "hstar", cfg.hstar, training);
  auto base = resnet_forward(viirs_ref, p, "f3", cfg.f3, training);
  auto fused = ad::concat_channels(base, diff);
  auto out = resnet_forward(fused, p, "gstar", cfg.gstar, training);
  return ad::relu(out);
}

// Ablation wiring: features combined by literal subtraction instead of
// learned fusion; no output activation.
template <class T>
ad::Tensor<T> linear_prototype_forward(const ad::Tensor<T>& dmsp_ref,
                                       const ad::Tensor<T>& dmsp_tgt,
                                       const ad::Tensor<T>& viirs_ref, Params<T>& p,
                                       const ModelConfig& cfg, bool training) {
  if (dmsp_ref.rank() != 4) throw DataError("dmsp_ref: expected rank-4 tensor");
  const int N = dmsp_ref.dim(0);
  detail::check_stage(dmsp_ref, "dmsp_ref", N, 1, cfg.h, cfg.w);
  detail::check_stage(dmsp_tgt, "dmsp_tgt", N, 1, cfg.h, cfg.w);
  detail::check_stage(viirs_ref, "viirs_ref", N, 1, 2 * cfg.h, 2 * cfg.w);

  auto feat_ref = rcan_forward(dmsp_ref, p, "f1", cfg.f1, training);
  auto feat_tgt = rcan_forward(dmsp_tgt, p, "f1", cfg.f1, training);
  auto annual = ad::conv2d(ad::sub(feat_ref, feat_tgt), param(p, "h.w"),
                           ad::Tensor<T>());
  auto base = resnet_forward(viirs_ref, p, "f3", cfg.f3, training);
  ResnetConfig g_cfg{cfg.c, cfg.gstar.midC, 1, cfg.gstar.S};
  return resnet_forward(ad::sub(base, annual), p, "g", g_cfg, training);
}

}  // namespace ntl::model
