#include "ntl/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ntl/bytes.hpp"
#include "ntl/error.hpp"

namespace ntl::model {

namespace {

constexpr char kMagic[4] = {'N', 'T', 'L', 'C'};
constexpr uint16_t kVersion = 1;

void put_config(std::vector<uint8_t>& out, const ModelConfig& cfg) {
  auto put_net = [&](const ResnetConfig& r) {
    put_u32(out, uint32_t(r.inpC));
    put_u32(out, uint32_t(r.midC));
    put_u32(out, uint32_t(r.outC));
    put_u32(out, uint32_t(r.S));
  };
  put_u32(out, uint32_t(cfg.h));
  put_u32(out, uint32_t(cfg.w));
  put_u32(out, uint32_t(cfg.c));
  put_net(cfg.f3);
  put_net(cfg.hstar);
  put_net(cfg.gstar);
  put_u32(out, uint32_t(cfg.f1.dim));
  put_u32(out, uint32_t(cfg.f1.G));
  put_u32(out, uint32_t(cfg.f1.B));
  put_u32(out, uint32_t(cfg.f1.e));
}

ModelConfig read_config(ByteReader& in) {
  auto get_net = [&](ResnetConfig& r) {
    r.inpC = int(in.u32());
    r.midC = int(in.u32());
    r.outC = int(in.u32());
    r.S = int(in.u32());
  };
  ModelConfig cfg;
  cfg.h = int(in.u32());
  cfg.w = int(in.u32());
  cfg.c = int(in.u32());
  get_net(cfg.f3);
  get_net(cfg.hstar);
  get_net(cfg.gstar);
  cfg.f1.dim = int(in.u32());
  cfg.f1.G = int(in.u32());
  cfg.f1.B = int(in.u32());
  cfg.f1.e = int(in.u32());
  return cfg;
}

}  // namespace

std::vector<uint8_t> to_ntlc_bytes(const Params<float>& p, const ModelConfig& cfg) {
  validate(cfg);
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kVersion);
  put_config(out, cfg);
  put_u32(out, uint32_t(p.size()));
  for (const auto& [key, t] : p) {
    put_u32(out, uint32_t(key.size()));
    out.insert(out.end(), key.begin(), key.end());
    put_u32(out, uint32_t(t.rank()));
    for (int d = 0; d < t.rank(); ++d) put_u32(out, uint32_t(t.dim(d)));
    for (float v : t.values()) put_f32(out, v);
  }
  return out;
}

std::pair<Params<float>, ModelConfig> from_ntlc_bytes(const uint8_t* bytes,
                                                      std::size_t n) {
  ByteReader in{bytes, n, "ntlc"};
  in.need(4);
  if (std::memcmp(bytes, kMagic, 4) != 0) throw DataError("ntlc: bad magic");
  in.pos = 4;
  if (in.u16() != kVersion) throw DataError("ntlc: unsupported version");
  ModelConfig cfg = read_config(in);
  validate(cfg);

  Params<float> p;
  const uint32_t count = in.u32();
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t keylen = in.u32();
    if (keylen == 0 || keylen > 4096) throw DataError("ntlc: bad key length");
    std::string key = in.bytes(keylen);
    const uint32_t rank = in.u32();
    if (rank == 0 || rank > 4) throw DataError("ntlc: bad tensor rank for " + key);
    std::vector<int> shape(rank);
    std::size_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      const uint32_t dim = in.u32();
      if (dim == 0 || dim > (1u << 24)) throw DataError("ntlc: bad dim for " + key);
      shape[d] = int(dim);
      numel *= dim;
    }
    if (numel > (std::size_t(1) << 32)) throw DataError("ntlc: oversized tensor " + key);
    std::vector<float> vals(numel);
    for (auto& v : vals) v = in.f32();
    if (p.count(key)) throw DataError("ntlc: duplicate key " + key);
    p.emplace(key, ad::Tensor<float>::from_values(shape, std::move(vals)));
  }
  if (!in.done()) throw DataError("ntlc: trailing bytes");

  // Records must match the config-derived shape table exactly, in both
  // directions. The h.w key marks a linear-prototype checkpoint.
  const ParamTable table = param_table(cfg, p.count("h.w") > 0);
  for (const auto& [key, spec] : table)
    if (!p.count(key)) throw DataError("ntlc: missing parameter " + key);
  for (const auto& [key, t] : p) {
    auto it = table.find(key);
    if (it == table.end()) throw DataError("ntlc: unexpected parameter " + key);
    if (t.shape() != it->second.shape)
      throw DataError("ntlc: shape mismatch for " + key);
  }
  return {std::move(p), cfg};
}

void save_checkpoint(const std::string& path, const Params<float>& p,
                     const ModelConfig& cfg) {
  const auto bytes = to_ntlc_bytes(p, cfg);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("ntlc: cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  if (!out) throw DataError("ntlc: write failed for " + path);
}

std::pair<Params<float>, ModelConfig> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("ntlc: cannot open " + path);
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size))
    throw DataError("ntlc: read failed for " + path);
  return from_ntlc_bytes(bytes.data(), bytes.size());
}

}  // namespace ntl::model
