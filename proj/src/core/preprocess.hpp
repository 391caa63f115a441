#pragma once

#include <cstdint>
#include <vector>

#include "volume.hpp"

namespace r2u3d {

/// Source slice for each of `target` output slices: floor((i + 1/2) * depth / target), clamped.
std::vector<int64_t> depth_index_map(int64_t depth, int64_t target);

/// Copies whole slices according to depth_index_map; H and W are untouched.
Volume resample_depth(const Volume& v, int64_t target);

/// Per-scan min-max scaling to [0, 1]; a constant scan becomes all zeros.
Volume normalize(const Volume& v);

/// Resamples both volumes with one index map, normalizes the image and
/// re-binarizes the mask at 0.5.
ScanPair preprocess_pair(const Volume& image, const Volume& mask, int64_t target);

}  // namespace r2u3d
