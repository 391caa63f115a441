#include "tape.hpp"

namespace r2u3d::testing {
namespace {
std::optional<std::string>& fault_slot() {
  static std::optional<std::string> slot;
  return slot;
}
}  // namespace

void set_backward_fault(std::optional<std::string> op) { fault_slot() = std::move(op); }
const std::optional<std::string>& backward_fault() { return fault_slot(); }

}  // namespace r2u3d::testing
