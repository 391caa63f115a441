#pragma once

#include <cstdint>
#include <vector>

#include "volume.hpp"

namespace r2u3d {

struct PhantomOptions {
  Triple dims{16, 32, 32};
  int count = 5;
  double noise_sigma = 0.1;
  /// Ellipsoids per volume.
  int blobs = 2;
};

/// Random ellipsoid masks; image = mask + N(0, noise_sigma). Fully determined by `seed`.
std::vector<ScanPair> generate_phantoms(const PhantomOptions& opts, uint64_t seed);

}  // namespace r2u3d
