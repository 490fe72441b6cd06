#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ntl/model.hpp"

namespace ntl::model {

// Self-describing weight container: magic "NTLC", u16 version, the full
// ModelConfig (fixed field order, little-endian u32), then count-prefixed
// (key, shape, f32 payload) records sorted by key. Loading needs no
// external shape knowledge and validates every record against the config.
std::vector<uint8_t> to_ntlc_bytes(const Params<float>& p, const ModelConfig& cfg);
std::pair<Params<float>, ModelConfig> from_ntlc_bytes(const uint8_t* bytes,
                                                      std::size_t n);

void save_checkpoint(const std::string& path, const Params<float>& p,
                     const ModelConfig& cfg);
std::pair<Params<float>, ModelConfig> load_checkpoint(const std::string& path);

}  // namespace ntl::model
