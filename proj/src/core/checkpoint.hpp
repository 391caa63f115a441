#pragma once

#include <filesystem>

#include "model.hpp"

namespace r2u3d {

/// Single-file checkpoint:
///   "R2U3DCKP" | u32 version | u64 manifest bytes | manifest JSON | f32 payload
/// All integers and floats little-endian. The manifest lists the config
/// snapshot and, per parameter, its path, shape, element offset and count.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace r2u3d
