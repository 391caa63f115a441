#pragma once

#include "tape.hpp"
#include "tensor.hpp"

namespace r2u3d {

/// Exponential logarithmic loss settings.
struct EllConfig {
  double w_dsc = 0.8;
  double w_wcel = 0.2;
  double gamma_dsc = 0.3;
  double gamma_wcel = 0.3;
  double pos_weight = 1.0;
  double eps = 1e-7;
  double prob_clamp = 1e-7;

  void validate() const;
};

inline constexpr double kDiceEps = 1e-7;

/// Hard Dice on binary masks: (2 sum(p g) + eps) / (sum p + sum g + eps).
/// Throws on shape mismatch or values outside {0, 1}.
template <typename T>
double dsc(const Tensor<T>& p, const Tensor<T>& g, double eps = kDiceEps);

/// Soft Dice value without recording: (2 sum(p g) + eps) / (sum p^2 + sum g^2 + eps).
template <typename T>
double soft_dsc_value(const Tensor<T>& p, const Tensor<T>& g, double eps = kDiceEps);

/// 1 where p >= tau, else 0.
template <typename T>
Tensor<T> threshold(const Tensor<T>& p, double tau);

namespace loss {

/// Soft Dice as a differentiable scalar; gradient flows to p only.
template <typename T>
TensorPtr<T> soft_dsc(Tape<T>* tape, const TensorPtr<T>& p, const TensorPtr<T>& g, double eps = kDiceEps);

/// 1 - soft_dsc.
template <typename T>
TensorPtr<T> dice_loss(Tape<T>* tape, const TensorPtr<T>& p, const TensorPtr<T>& g, double eps = kDiceEps);

/// Mean weighted cross entropy on logit(clamp(p)):
/// (1 - g) x + (1 + (pos_weight - 1) g) log(1 + exp(-x)).
template <typename T>
TensorPtr<T> wcel(Tape<T>* tape, const TensorPtr<T>& p, const TensorPtr<T>& g, double pos_weight = 1.0,
                  double prob_clamp = 1e-7);

/// w_dsc * max(-ln soft_dsc, eps)^gamma_dsc + w_wcel * max(wcel, eps)^gamma_wcel.
template <typename T>
TensorPtr<T> ell(Tape<T>* tape, const TensorPtr<T>& p, const TensorPtr<T>& g, const EllConfig& cfg);

}  // namespace loss
}  // namespace r2u3d
