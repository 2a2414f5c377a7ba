#pragma once

#include <filesystem>

#include "susl/model.hpp"

namespace susl {

/// Binary model container, little-endian, format version 1:
///   magic "SUSLCKPT" | u32 version | config (10 x i32) |
///   u32 tensor count | per tensor: u32 name length, name bytes,
///   u32 rank, i32 extents, f64 row-major values.
/// Round-trips are bit-exact.
struct Checkpoint {
  ModelConfig config;
  Parameters params;
};

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const Parameters& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace susl
