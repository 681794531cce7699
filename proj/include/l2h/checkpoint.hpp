#pragma once

#include <string>

#include "l2h/model.hpp"

namespace l2h {

// Checkpoint container: magic "L2HC", u32le version, u32le metadata length,
// metadata JSON (model config, frozen flags, seed), u32le tensor count, then
// per tensor: u16le name length, name, u8 ndim, u32le dims, f32le payload.
// Parameters and normalization statistics round-trip bitwise.
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, CountingModel<float>& model, std::uint64_t seed);

CountingModel<float> load_checkpoint(const std::string& path);

// JSON (de)serialization of the model configuration, shared with reports.
std::string model_config_to_json(const ModelConfig& cfg, bool low_frozen, bool has_low,
                                 std::uint64_t seed);

}  // namespace l2h
