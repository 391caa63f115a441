#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tape.hpp"
#include "tensor.hpp"

namespace r2u3d {

/// A scalar-valued tensor program in 64-bit precision. Called with a tape to
/// record for backward and with nullptr for plain re-evaluation.
using GradProgram = std::function<TensorPtr<double>(Tape<double>*)>;

struct GradCheckOptions {
  /// Central-difference step is step_scale * max(1, |theta|).
  double step_scale = 1e-4;
  /// Hold relu/max-pool/clamp decisions at those of the unperturbed point
  /// while differencing, so the step never crosses a switching point.
  bool freeze_decisions = false;
};

/// Max over all coordinates of all inputs of
/// |analytic - central difference| / max(|analytic|, |cd|, 1e-8).
double grad_check(const GradProgram& fn, std::span<const TensorPtr<double>> inputs, GradCheckOptions opts = {});

}  // namespace r2u3d
