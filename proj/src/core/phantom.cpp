#include "phantom.hpp"

#include <random>

namespace r2u3d {

std::vector<ScanPair> generate_phantoms(const PhantomOptions& opts, uint64_t seed) {
  require(opts.count >= 0, ErrorCode::InvalidArgument, "phantoms: count must be >= 0");
  require(opts.blobs >= 1, ErrorCode::InvalidArgument, "phantoms: blobs must be >= 1");
  require(opts.noise_sigma >= 0, ErrorCode::InvalidArgument, "phantoms: noise sigma must be >= 0");
  for (auto e : opts.dims) require(e >= 4, ErrorCode::InvalidArgument, "phantoms: extents must be >= 4");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<ScanPair> out;
  for (int s = 0; s < opts.count; ++s) {
    ScanPair pair{Volume(opts.dims), Volume(opts.dims)};
    struct Blob {
      std::array<double, 3> center, radius;
    };
    std::vector<Blob> blobs;
    for (int b = 0; b < opts.blobs; ++b) {
      Blob blob;
      for (int a = 0; a < 3; ++a) {
        const double ext = static_cast<double>(opts.dims[a]);
        blob.radius[a] = ext * (0.15 + 0.15 * unit(rng));
        blob.center[a] = ext * (0.3 + 0.4 * unit(rng));
      }
      blobs.push_back(blob);
    }
    for (int64_t d = 0; d < opts.dims[0]; ++d)
      for (int64_t h = 0; h < opts.dims[1]; ++h)
        for (int64_t w = 0; w < opts.dims[2]; ++w) {
          const std::array<double, 3> p{d + 0.5, h + 0.5, w + 0.5};
          bool inside = false;
          for (const auto& blob : blobs) {
            double r2 = 0;
            for (int a = 0; a < 3; ++a) {
              const double u = (p[a] - blob.center[a]) / blob.radius[a];
              r2 += u * u;
            }
            inside = inside || r2 <= 1.0;
          }
          pair.mask.at(d, h, w) = inside ? 1.0f : 0.0f;
        }
    for (size_t i = 0; i < pair.image.voxels.size(); ++i)
      pair.image.voxels[i] = static_cast<float>(pair.mask.voxels[i] + opts.noise_sigma * noise(rng));
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace r2u3d
