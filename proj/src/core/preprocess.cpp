#include "preprocess.hpp"

#include <algorithm>
#include <cstring>

namespace r2u3d {

std::vector<int64_t> depth_index_map(int64_t depth, int64_t target) {
  require(depth >= 1, ErrorCode::InvalidArgument, "resample: source depth must be >= 1");
  require(target >= 1, ErrorCode::InvalidArgument, "resample: target depth must be >= 1");
  std::vector<int64_t> map(static_cast<size_t>(target));
  for (int64_t i = 0; i < target; ++i)
    map[static_cast<size_t>(i)] = std::min((2 * i + 1) * depth / (2 * target), depth - 1);
  return map;
}

Volume resample_depth(const Volume& v, int64_t target) {
  v.validate();
  const auto map = depth_index_map(v.dims[0], target);
  Volume out({target, v.dims[1], v.dims[2]}, v.spacing);
  out.spacing[0] = v.spacing[0] * static_cast<double>(v.dims[0]) / static_cast<double>(target);
  const size_t slice = static_cast<size_t>(v.dims[1] * v.dims[2]);
  for (size_t i = 0; i < map.size(); ++i)
    std::copy_n(v.voxels.begin() + static_cast<std::ptrdiff_t>(static_cast<size_t>(map[i]) * slice), slice,
                out.voxels.begin() + static_cast<std::ptrdiff_t>(i * slice));
  return out;
}

Volume normalize(const Volume& v) {
  v.validate();
  Volume out = v;
  if (v.voxels.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(v.voxels.begin(), v.voxels.end());
  const double lo = *lo_it, hi = *hi_it;
  require(std::isfinite(lo) && std::isfinite(hi), ErrorCode::NonFinite, "normalize: non-finite voxel");
  if (hi == lo) {
    std::fill(out.voxels.begin(), out.voxels.end(), 0.0f);
    return out;
  }
  const double range = hi - lo;
  for (auto& x : out.voxels) x = static_cast<float>((static_cast<double>(x) - lo) / range);
  return out;
}

ScanPair preprocess_pair(const Volume& image, const Volume& mask, int64_t target) {
  require(image.dims == mask.dims, ErrorCode::ShapeMismatch,
          "preprocess: image dims " + to_string(image.dims) + " differ from mask dims " + to_string(mask.dims));
  ScanPair out;
  out.image = normalize(resample_depth(image, target));
  out.mask = resample_depth(mask, target);
  for (auto& x : out.mask.voxels) x = x >= 0.5f ? 1.0f : 0.0f;
  return out;
}

}  // namespace r2u3d
