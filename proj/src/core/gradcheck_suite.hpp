#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace r2u3d {

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckResult> results;
  double tolerance = 1e-3;

  bool passed() const;
  /// One line per check followed by a summary line.
  std::string to_text() const;
};

/// Op names whose backward the fault hook can corrupt.
std::vector<std::string> faultable_ops();

/// Names of the checks in execution order.
std::vector<std::string> gradcheck_names();

/// Finite-difference checks in 64-bit precision over every primitive, block,
/// loss and a toy end-to-end model. `only` restricts the run to one check.
GradCheckReport run_gradcheck_suite(uint64_t seed, double tolerance = 1e-3, const std::string& only = {});

}  // namespace r2u3d
