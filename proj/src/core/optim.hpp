#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "params.hpp"

namespace r2u3d {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment buffers, one per parameter tensor, and the step count.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  int64_t t = 0;

  AdamState() = default;
  explicit AdamState(const ParamStore<float>& params);
};

/// One bias-corrected Adam update using the gradients held by `params`.
/// Throws on shape mismatch with the state, lr <= 0, or a non-finite gradient;
/// nothing is modified when it throws.
void adam_step(ParamStore<float>& params, AdamState& state, double lr, const AdamOptions& opts = {});

/// Piecewise-constant rates: (count, rate) segments in order.
struct LrSchedule {
  std::vector<std::pair<int64_t, double>> segments{{400, 1e-3}, {100, 1e-4}};

  void validate() const;
  int64_t total() const;
};

/// Rate of the segment containing `iteration`; the last rate persists past the end.
double lr_at(const LrSchedule& schedule, int64_t iteration);

}  // namespace r2u3d
