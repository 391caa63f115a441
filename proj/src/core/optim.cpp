#include "optim.hpp"

#include <cmath>

namespace r2u3d {

AdamState::AdamState(const ParamStore<float>& params) {
  for (size_t i = 0; i < params.size(); ++i) {
    m.emplace_back(static_cast<size_t>(params[i]->numel()), 0.0);
    v.emplace_back(static_cast<size_t>(params[i]->numel()), 0.0);
  }
}

void adam_step(ParamStore<float>& params, AdamState& state, double lr, const AdamOptions& opts) {
  require(lr > 0 && std::isfinite(lr), ErrorCode::InvalidArgument, "adam: learning rate must be > 0");
  require(state.m.size() == params.size() && state.v.size() == params.size(), ErrorCode::ShapeMismatch,
          "adam: state holds " + std::to_string(state.m.size()) + " buffers for " + std::to_string(params.size()) +
              " parameters");
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& p = *params[i];
    require(static_cast<int64_t>(state.m[i].size()) == p.numel() && static_cast<int64_t>(state.v[i].size()) == p.numel(),
            ErrorCode::ShapeMismatch, "adam: moment buffer " + std::to_string(i) + " does not match its parameter");
    require(p.grad().empty() || static_cast<int64_t>(p.grad().size()) == p.numel(), ErrorCode::ShapeMismatch,
            "adam: gradient " + std::to_string(i) + " does not match its parameter");
    require(all_finite<float>(p.grad()), ErrorCode::NonFinite,
            "adam: non-finite gradient in parameter " + std::to_string(i));
  }

  state.t += 1;
  const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto g = p.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (size_t j = 0; j < m.size(); ++j) {
      const double gj = g.empty() ? 0.0 : static_cast<double>(g[j]);
      m[j] = opts.beta1 * m[j] + (1.0 - opts.beta1) * gj;
      v[j] = opts.beta2 * v[j] + (1.0 - opts.beta2) * gj * gj;
      const double mh = m[j] / c1;
      const double vh = v[j] / c2;
      p[static_cast<int64_t>(j)] = static_cast<float>(p[static_cast<int64_t>(j)] - lr * mh / (std::sqrt(vh) + opts.eps));
    }
  }
}

void LrSchedule::validate() const {
  require(!segments.empty(), ErrorCode::Config, "lr schedule is empty");
  for (const auto& [count, rate] : segments) {
    require(count > 0, ErrorCode::Config, "lr schedule: segment counts must be > 0");
    require(rate > 0 && std::isfinite(rate), ErrorCode::Config, "lr schedule: rates must be > 0");
  }
}

int64_t LrSchedule::total() const {
  int64_t n = 0;
  for (const auto& s : segments) n += s.first;
  return n;
}

double lr_at(const LrSchedule& schedule, int64_t iteration) {
  schedule.validate();
  require(iteration >= 0, ErrorCode::InvalidArgument, "lr_at: iteration must be >= 0");
  int64_t start = 0;
  for (const auto& [count, rate] : schedule.segments) {
    if (iteration < start + count) return rate;
    start += count;
  }
  return schedule.segments.back().second;
}

}  // namespace r2u3d
