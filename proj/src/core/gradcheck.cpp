#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "decision_trace.hpp"

namespace r2u3d {

namespace {
double evaluate(const GradProgram& fn, bool replay) {
  auto& trace = testing::decision_trace();
  if (replay) trace.start_replay();
  auto out = fn(nullptr);
  if (replay) trace.require_fully_replayed();
  require(out && out->numel() == 1, ErrorCode::ShapeMismatch, "grad_check: program output is not scalar");
  return (*out)[0];
}
}  // namespace

double grad_check(const GradProgram& fn, std::span<const TensorPtr<double>> inputs, GradCheckOptions opts) {
  for (const auto& in : inputs) require(all_finite<double>(in->data()), ErrorCode::NonFinite, "grad_check: non-finite input");

  auto& trace = testing::decision_trace();
  struct StopTrace {
    testing::DecisionTrace& t;
    ~StopTrace() { t.stop(); }
  } stop_guard{trace};
  if (opts.freeze_decisions) trace.start_recording();

  Tape<double> tape;
  auto root = fn(&tape);
  require(root && root->numel() == 1, ErrorCode::ShapeMismatch, "grad_check: program output is not scalar");
  for (const auto& in : inputs) in->zero_grad();
  tape.backward(root);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& in : inputs) analytic.emplace_back(in->grad().begin(), in->grad().end());

  double worst = 0.0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    auto& values = inputs[k]->values();
    for (size_t i = 0; i < values.size(); ++i) {
      const double theta = values[i];
      const double h = opts.step_scale * std::max(1.0, std::abs(theta));
      values[i] = theta + h;
      const double up = evaluate(fn, opts.freeze_decisions);
      values[i] = theta - h;
      const double down = evaluate(fn, opts.freeze_decisions);
      values[i] = theta;
      const double cd = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double err = std::abs(a - cd) / std::max({std::abs(a), std::abs(cd), 1e-8});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace r2u3d
