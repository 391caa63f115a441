#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace r2u3d::testing {

/// Branch decisions taken by piecewise ops (relu masks, max-pool argmaxes,
/// clamp masks) in call order. Recording captures them; replaying forces the
/// same decisions, so re-evaluations stay on the smooth piece that contains
/// the recorded point. Thread-local; Off by default.
class DecisionTrace {
 public:
  enum class Mode { Off, Record, Replay };

  Mode mode() const { return mode_; }
  void start_recording();
  /// Rewinds to the first recorded decision and enters Replay.
  void start_replay();
  void stop();
  /// Throws unless every recorded decision was consumed by the last replay.
  void require_fully_replayed() const;

  void record(std::vector<int64_t> decisions);
  /// Next recorded decision block; must have `size` entries.
  const std::vector<int64_t>& replay(size_t size, const char* op);

 private:
  Mode mode_ = Mode::Off;
  std::vector<std::vector<int64_t>> blocks_;
  size_t cursor_ = 0;
};

DecisionTrace& decision_trace();

}  // namespace r2u3d::testing
