#pragma once

#include "pmrnet/autograd.hpp"
#include "pmrnet/netconfig.hpp"

// Joint objective: total = 0.5 * BCE + Dice.
namespace pmrnet {

constexpr double kProbabilityClamp = 1e-7;

struct LossBreakdown {
  double bce = 0.0;
  double dice = 0.0;
  double total = 0.0;
};

// Plain evaluation. Shapes must match (ShapeError otherwise).
// BCE averages over every pixel of the batch after clamping predictions to
// [1e-7, 1 - 1e-7].
template <typename T>
double bce_loss(const Tensor<T>& pred, const Tensor<T>& target,
                LogBase base = LogBase::natural);

// 1 - 2 sum(y p) / (sum(y^2) + sum(p^2) + smooth) per sample, averaged over
// the batch. smooth is only in the denominator.
template <typename T>
double dice_loss(const Tensor<T>& pred, const Tensor<T>& target, double smooth);

template <typename T>
LossBreakdown total_loss(const Tensor<T>& pred, const Tensor<T>& target,
                         double smooth, LogBase base = LogBase::natural);

// 0.5 * BCE + Dice accumulated and returned in long double. Used as the
// finite-difference oracle, where double rounding of the reduction would
// swamp the difference quotient.
template <typename T>
long double total_loss_extended(const Tensor<T>& pred, const Tensor<T>& target,
                                double smooth, LogBase base = LogBase::natural);

// Differentiable versions; the gradient flows into pred only.
template <typename T>
Var<T> bce_loss(const Var<T>& pred, const Tensor<T>& target,
                LogBase base = LogBase::natural);

template <typename T>
Var<T> dice_loss(const Var<T>& pred, const Tensor<T>& target, double smooth);

template <typename T>
struct LossVars {
  Var<T> total;
  Var<T> bce;
  Var<T> dice;

  LossBreakdown breakdown() const;
};

template <typename T>
LossVars<T> total_loss(const Var<T>& pred, const Tensor<T>& target,
                       double smooth, LogBase base = LogBase::natural);

}  // namespace pmrnet
