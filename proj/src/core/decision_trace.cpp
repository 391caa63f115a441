#include "decision_trace.hpp"

#include "error.hpp"

namespace r2u3d::testing {

void DecisionTrace::start_recording() {
  mode_ = Mode::Record;
  blocks_.clear();
  cursor_ = 0;
}

void DecisionTrace::start_replay() {
  mode_ = Mode::Replay;
  cursor_ = 0;
}

void DecisionTrace::stop() {
  mode_ = Mode::Off;
  blocks_.clear();
  cursor_ = 0;
}

void DecisionTrace::require_fully_replayed() const {
  require(cursor_ == blocks_.size(), ErrorCode::State,
          "decision replay consumed " + std::to_string(cursor_) + " of " + std::to_string(blocks_.size()) + " blocks");
}

void DecisionTrace::record(std::vector<int64_t> decisions) { blocks_.push_back(std::move(decisions)); }

const std::vector<int64_t>& DecisionTrace::replay(size_t size, const char* op) {
  require(cursor_ < blocks_.size() && blocks_[cursor_].size() == size, ErrorCode::State,
          std::string("decision replay out of step at ") + op);
  return blocks_[cursor_++];
}

DecisionTrace& decision_trace() {
  thread_local DecisionTrace trace;
  return trace;
}

}  // namespace r2u3d::testing
