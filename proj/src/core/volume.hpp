#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tensor.hpp"

namespace r2u3d {

/// Scalar volume, row-major with W fastest.
struct Volume {
  Triple dims{0, 0, 0};                  // (D, H, W)
  std::array<double, 3> spacing{1, 1, 1};  // (z, y, x) in millimetres
  std::vector<float> voxels;

  Volume() = default;
  Volume(const Triple& dims, std::array<double, 3> spacing = {1, 1, 1});

  int64_t size() const { return dims[0] * dims[1] * dims[2]; }
  float& at(int64_t d, int64_t h, int64_t w) { return voxels[static_cast<size_t>((d * dims[1] + h) * dims[2] + w)]; }
  float at(int64_t d, int64_t h, int64_t w) const {
    return voxels[static_cast<size_t>((d * dims[1] + h) * dims[2] + w)];
  }

  /// Throws unless voxel count matches dims and spacing is positive.
  void validate() const;
  /// As a [1, 1, D, H, W] tensor.
  Tensor<float> to_tensor() const;
  static Volume from_tensor(const Tensor<float>& t, std::array<double, 3> spacing = {1, 1, 1});

  bool operator==(const Volume&) const = default;
};

struct ScanPair {
  Volume image;
  Volume mask;  // values in {0, 1}
};

/// Reads a MetaImage header (.mhd) and its separate little-endian raw payload.
Volume read_metaimage(const std::filesystem::path& header);

/// Internal format: a text manifest at `path` and a raw f32 payload beside it.
void write_volume(const Volume& v, const std::filesystem::path& path);
Volume read_volume(const std::filesystem::path& path);

/// Dispatches on extension: .mhd is MetaImage, anything else the internal format.
Volume read_any_volume(const std::filesystem::path& path);

}  // namespace r2u3d
