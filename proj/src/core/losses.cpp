#include "losses.hpp"

#include <algorithm>
#include <cmath>

#include "accumulate.hpp"
#include "ops.hpp"

namespace r2u3d {

void EllConfig::validate() const {
  require(w_dsc >= 0 && w_wcel >= 0, ErrorCode::Config, "ell: weights must be >= 0");
  require(gamma_dsc > 0 && gamma_wcel > 0, ErrorCode::Config, "ell: exponents must be > 0");
  require(prob_clamp > 0 && prob_clamp < 0.5, ErrorCode::Config, "ell: prob_clamp must lie in (0, 0.5)");
  require(eps > 0, ErrorCode::Config, "ell: eps must be > 0");
  require(pos_weight > 0, ErrorCode::Config, "ell: pos_weight must be > 0");
}

namespace {
template <typename T>
void require_pair(const Tensor<T>& p, const Tensor<T>& g, const char* op) {
  require(p.shape() == g.shape(), ErrorCode::ShapeMismatch,
          std::string(op) + ": shape mismatch " + p.shape().str() + " vs " + g.shape().str());
}

struct DiceSums {
  double inter = 0, pp = 0, gg = 0;
};

template <typename T>
DiceSums dice_sums(const Tensor<T>& p, const Tensor<T>& g) {
  CompensatedSum inter, pp, gg;
  for (int64_t i = 0; i < p.numel(); ++i) {
    const double pv = p[i], gv = g[i];
    inter.add(pv * gv);
    pp.add(pv * pv);
    gg.add(gv * gv);
  }
  return {inter.value(), pp.value(), gg.value()};
}

inline double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }
}  // namespace

template <typename T>
double dsc(const Tensor<T>& p, const Tensor<T>& g, double eps) {
  require_pair(p, g, "dsc");
  double inter = 0, sp = 0, sg = 0;
  for (int64_t i = 0; i < p.numel(); ++i) {
    const T pv = p[i], gv = g[i];
    require((pv == T(0) || pv == T(1)) && (gv == T(0) || gv == T(1)), ErrorCode::InvalidArgument,
            "dsc: inputs must be binary");
    inter += pv * gv;
    sp += pv;
    sg += gv;
  }
  return (2.0 * inter + eps) / (sp + sg + eps);
}

template <typename T>
double soft_dsc_value(const Tensor<T>& p, const Tensor<T>& g, double eps) {
  require_pair(p, g, "soft_dsc");
  const DiceSums s = dice_sums(p, g);
  return (2.0 * s.inter + eps) / (s.pp + s.gg + eps);
}

template <typename T>
Tensor<T> threshold(const Tensor<T>& p, double tau) {
  require(tau > 0 && tau < 1, ErrorCode::InvalidArgument, "threshold: tau must lie in (0, 1)");
  Tensor<T> out(p.shape());
  for (int64_t i = 0; i < p.numel(); ++i) out[i] = static_cast<double>(p[i]) >= tau ? T(1) : T(0);
  return out;
}

namespace loss {

template <typename T>
TensorPtr<T> soft_dsc(Tape<T>* tape, const TensorPtr<T>& p, const TensorPtr<T>& g, double eps) {
  require_pair(*p, *g, "soft_dsc");
  const DiceSums s = dice_sums(*p, *g);
  const double num = 2.0 * s.inter + eps;
  const double den = s.pp + s.gg + eps;
  auto out = make_tensor<T>(scalar_shape(), static_cast<T>(num / den));
  if (tape) {
    tape->record("soft_dsc", out, {p, g}, [p = p.get(), g = g.get(), out = out.get(), num, den] {
      const double upstream = out->grad()[0];
      auto gp = p->ensure_grad();
      const double inv = 1.0 / (den * den);
      for (size_t i = 0; i < gp.size(); ++i)
        gp[i] += static_cast<T>(upstream * (2.0 * (*g)[i] * den - num * 2.0 * (*p)[i]) * inv);
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> dice_loss(Tape<T>* tape, const TensorPtr<T>& p, const TensorPtr<T>& g, double eps) {
  return ops::affine(tape, soft_dsc(tape, p, g, eps), -1.0, 1.0);
}

template <typename T>
TensorPtr<T> wcel(Tape<T>* tape, const TensorPtr<T>& p, const TensorPtr<T>& g, double pos_weight, double prob_clamp) {
  require_pair(*p, *g, "wcel");
  require(prob_clamp > 0 && prob_clamp < 0.5, ErrorCode::InvalidArgument, "wcel: prob_clamp must lie in (0, 0.5)");
  const int64_t n = p->numel();
  require(n > 0, ErrorCode::ShapeMismatch, "wcel: empty input");
  CompensatedSum total;
  for (int64_t i = 0; i < n; ++i) {
    const double pc = std::clamp(static_cast<double>((*p)[i]), prob_clamp, 1.0 - prob_clamp);
    const double x = std::log(pc / (1.0 - pc));
    const double gv = (*g)[i];
    total.add((1.0 - gv) * x + (1.0 + (pos_weight - 1.0) * gv) * softplus(-x));
  }
  auto out = make_tensor<T>(scalar_shape(), static_cast<T>(total.value() / static_cast<double>(n)));
  if (tape) {
    tape->record("wcel", out, {p, g}, [p = p.get(), g = g.get(), out = out.get(), pos_weight, prob_clamp, n] {
      const double upstream = out->grad()[0] / static_cast<double>(n);
      auto gp = p->ensure_grad();
      for (int64_t i = 0; i < n; ++i) {
        const double pv = (*p)[i];
        if (pv < prob_clamp || pv > 1.0 - prob_clamp) continue;
        const double gv = (*g)[i];
        // d/dx softplus(-x) = -sigmoid(-x) = -(1 - p)
        const double dl_dx = (1.0 - gv) - (1.0 + (pos_weight - 1.0) * gv) * (1.0 - pv);
        gp[i] += static_cast<T>(upstream * dl_dx / (pv * (1.0 - pv)));
      }
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> ell(Tape<T>* tape, const TensorPtr<T>& p, const TensorPtr<T>& g, const EllConfig& cfg) {
  cfg.validate();
  auto neg_log_dice = ops::affine(tape, ops::log(tape, soft_dsc(tape, p, g, cfg.eps)), -1.0, 0.0);
  auto dice_term = ops::pow(tape, ops::clamp_min(tape, neg_log_dice, cfg.eps), cfg.gamma_dsc);
  auto cross_term =
      ops::pow(tape, ops::clamp_min(tape, wcel(tape, p, g, cfg.pos_weight, cfg.prob_clamp), cfg.eps), cfg.gamma_wcel);
  return ops::add(tape, ops::affine(tape, dice_term, cfg.w_dsc, 0.0), ops::affine(tape, cross_term, cfg.w_wcel, 0.0));
}

}  // namespace loss

template double dsc(const Tensor<float>&, const Tensor<float>&, double);
template double dsc(const Tensor<double>&, const Tensor<double>&, double);
template double soft_dsc_value(const Tensor<float>&, const Tensor<float>&, double);
template double soft_dsc_value(const Tensor<double>&, const Tensor<double>&, double);
template Tensor<float> threshold(const Tensor<float>&, double);
template Tensor<double> threshold(const Tensor<double>&, double);

namespace loss {
#define R2U3D_INSTANTIATE_LOSS_OPS(T)                                                                        \
  template TensorPtr<T> soft_dsc(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&, double);              \
  template TensorPtr<T> dice_loss(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&, double);             \
  template TensorPtr<T> wcel(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&, double, double);          \
  template TensorPtr<T> ell(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&, const EllConfig&);
R2U3D_INSTANTIATE_LOSS_OPS(float)
R2U3D_INSTANTIATE_LOSS_OPS(double)
#undef R2U3D_INSTANTIATE_LOSS_OPS
}  // namespace loss

}  // namespace r2u3d
