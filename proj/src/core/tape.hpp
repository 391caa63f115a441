#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace r2u3d {

namespace testing {
// When set, every tape entry with this op name sees its upstream gradient
// scaled by 1.05 before its backward runs. Used to prove the gradient
// checker notices a broken backward.
void set_backward_fault(std::optional<std::string> op);
const std::optional<std::string>& backward_fault();
}  // namespace testing

/// Record of executed primitives for reverse-mode differentiation.
///
/// Each entry owns its output and inputs, so recorded tensors stay alive
/// until backward() runs. A tape may be replayed once.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(std::string op, TensorPtr<T> output, std::vector<TensorPtr<T>> inputs, BackwardFn fn) {
    require(!consumed_, ErrorCode::State, "tape already consumed; cannot record " + op);
    entries_.push_back({std::move(op), std::move(output), std::move(inputs), std::move(fn)});
  }

  size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

  std::vector<std::string> op_names() const {
    std::vector<std::string> names;
    names.reserve(entries_.size());
    for (const auto& e : entries_) names.push_back(e.op);
    return names;
  }

  /// Resets the gradient of every tensor on the tape to zero, seeds root with
  /// 1 and replays entries in reverse. Tensors that are not on the tape keep
  /// whatever gradient they had; callers zero parameter stores beforehand.
  void backward(const TensorPtr<T>& root) {
    require(root != nullptr, ErrorCode::InvalidArgument, "backward: null root");
    require(root->numel() == 1, ErrorCode::ShapeMismatch,
            "backward: root must be scalar, got " + root->shape().str());
    require(!consumed_, ErrorCode::State, "backward: tape already consumed");
    for (auto& e : entries_) {
      e.output->zero_grad();
      for (auto& in : e.inputs) in->zero_grad();
    }
    root->ensure_grad()[0] = T(1);

    const auto& fault = testing::backward_fault();
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      if (fault && *fault == it->op)
        for (auto& g : it->output->grad()) g *= T(1.05);
      it->fn();
    }
    consumed_ = true;
    entries_.clear();
  }

 private:
  struct Entry {
    std::string op;
    TensorPtr<T> output;
    std::vector<TensorPtr<T>> inputs;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
  bool consumed_ = false;
};

}  // namespace r2u3d
