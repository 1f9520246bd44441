#include "pmrnet/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "pmrnet/errors.hpp"
#include "pmrnet/ops.hpp"

namespace pmrnet {

namespace {

void check_shapes(const Shape& pred, const Shape& target, const char* what) {
  if (pred != target) {
    throw ShapeError(std::string(what) + ": prediction " + pred.to_string() +
                     " vs target " + target.to_string());
  }
  if (pred.size() == 0) throw ShapeError(std::string(what) + ": empty input");
}

double log_scale(LogBase base) {
  return base == LogBase::two ? 1.0 / std::numbers::ln2 : 1.0;
}

double clamp_probability(double p) {
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

Tensor<double> scalar(double v) {
  return Tensor<double>(Shape{1, 1, 1, 1}, v);
}

struct DiceTerms {
  // Per sample: intersection sum(y p) and denominator sum(y^2)+sum(p^2)+smooth.
  std::vector<long double> intersection;
  std::vector<long double> denominator;
};

// Reductions accumulate in long double so that loss values stay accurate to
// well below double rounding; finite-difference checks depend on this.
template <typename T>
DiceTerms dice_terms(const Tensor<T>& pred, const Tensor<T>& target,
                     double smooth) {
  const Shape& s = pred.shape();
  const std::size_t per = s.c * s.h * s.w;
  DiceTerms terms{std::vector<long double>(s.n), std::vector<long double>(s.n)};
  for (std::size_t n = 0; n < s.n; ++n) {
    long double inter = 0.0L, yy = 0.0L, pp = 0.0L;
    for (std::size_t k = n * per; k < (n + 1) * per; ++k) {
      const long double p = pred[k];
      const long double y = target[k];
      inter += y * p;
      yy += y * y;
      pp += p * p;
    }
    terms.intersection[n] = inter;
    terms.denominator[n] = yy + pp + static_cast<long double>(smooth);
  }
  return terms;
}

template <typename T>
long double bce_extended(const Tensor<T>& pred, const Tensor<T>& target,
                         LogBase base) {
  check_shapes(pred.shape(), target.shape(), "bce_loss");
  long double sum = 0.0L;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const long double p = clamp_probability(pred[k]);
    const long double y = target[k];
    sum += y * std::log(p) + (1.0L - y) * std::log1p(-p);
  }
  return -sum / static_cast<long double>(pred.size()) * log_scale(base);
}

template <typename T>
long double dice_extended(const Tensor<T>& pred, const Tensor<T>& target,
                          double smooth) {
  check_shapes(pred.shape(), target.shape(), "dice_loss");
  const DiceTerms terms = dice_terms(pred, target, smooth);
  long double sum = 0.0L;
  for (std::size_t n = 0; n < terms.intersection.size(); ++n) {
    sum += 1.0L - 2.0L * terms.intersection[n] / terms.denominator[n];
  }
  return sum / static_cast<long double>(terms.intersection.size());
}

template <typename T>
void trace_clamp(const Tensor<T>& pred) {
  if (KinkTrace* trace = active_kink_trace()) {
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const double p = pred[k];
      trace->mix(p < kProbabilityClamp ? 1 : p > 1.0 - kProbabilityClamp ? 2 : 0);
    }
  }
}

}  // namespace

template <typename T>
double bce_loss(const Tensor<T>& pred, const Tensor<T>& target, LogBase base) {
  return static_cast<double>(bce_extended(pred, target, base));
}

template <typename T>
double dice_loss(const Tensor<T>& pred, const Tensor<T>& target, double smooth) {
  return static_cast<double>(dice_extended(pred, target, smooth));
}

template <typename T>
long double total_loss_extended(const Tensor<T>& pred, const Tensor<T>& target,
                                double smooth, LogBase base) {
  trace_clamp(pred);
  return 0.5L * bce_extended(pred, target, base) + dice_extended(pred, target, smooth);
}

template <typename T>
LossBreakdown total_loss(const Tensor<T>& pred, const Tensor<T>& target,
                         double smooth, LogBase base) {
  LossBreakdown out;
  out.bce = bce_loss(pred, target, base);
  out.dice = dice_loss(pred, target, smooth);
  out.total = 0.5 * out.bce + out.dice;
  return out;
}

template <typename T>
Var<T> bce_loss(const Var<T>& pred, const Tensor<T>& target, LogBase base) {
  const double value = bce_loss(pred->value, target, base);
  trace_clamp(pred->value);
  const double scale = log_scale(base);
  return make_op<T>(
      "bce_loss", scalar(value).cast<T>(), {pred},
      [target, scale](Node<T>& self) {
        const Var<T>& in = self.inputs[0];
        Tensor<T>& g = in->grad_buffer();
        const double seed = self.grad[0];
        const double inv_n = 1.0 / static_cast<double>(in->value.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
          const double raw = in->value[k];
          if (raw < kProbabilityClamp || raw > 1.0 - kProbabilityClamp) continue;
          const double y = target[k];
          const double d = -(y / raw - (1.0 - y) / (1.0 - raw)) * inv_n * scale;
          g[k] += static_cast<T>(seed * d);
        }
      });
}

template <typename T>
Var<T> dice_loss(const Var<T>& pred, const Tensor<T>& target, double smooth) {
  const double value = dice_loss(pred->value, target, smooth);
  return make_op<T>(
      "dice_loss", scalar(value).cast<T>(), {pred},
      [target, smooth](Node<T>& self) {
        const Var<T>& in = self.inputs[0];
        Tensor<T>& g = in->grad_buffer();
        const double seed = self.grad[0];
        const DiceTerms terms = dice_terms(in->value, target, smooth);
        const Shape& s = in->shape();
        const std::size_t per = s.c * s.h * s.w;
        const double inv_b = 1.0 / static_cast<double>(s.n);
        for (std::size_t n = 0; n < s.n; ++n) {
          const double inter = terms.intersection[n];
          const double den = terms.denominator[n];
          for (std::size_t k = n * per; k < (n + 1) * per; ++k) {
            const double p = in->value[k];
            const double y = target[k];
            const double d = -(2.0 * y / den - 4.0 * inter * p / (den * den)) * inv_b;
            g[k] += static_cast<T>(seed * d);
          }
        }
      });
}

template <typename T>
LossBreakdown LossVars<T>::breakdown() const {
  LossBreakdown out;
  out.bce = bce->value[0];
  out.dice = dice->value[0];
  out.total = 0.5 * out.bce + out.dice;
  return out;
}

template <typename T>
LossVars<T> total_loss(const Var<T>& pred, const Tensor<T>& target,
                       double smooth, LogBase base) {
  LossVars<T> out;
  out.bce = bce_loss(pred, target, base);
  out.dice = dice_loss(pred, target, smooth);
  out.total = ops::weighted_sum(out.bce, T(0.5), out.dice, T(1));
  return out;
}

#define PMRNET_INSTANTIATE(T)                                                  \
  template double bce_loss<T>(const Tensor<T>&, const Tensor<T>&, LogBase);    \
  template double dice_loss<T>(const Tensor<T>&, const Tensor<T>&, double);    \
  template LossBreakdown total_loss<T>(const Tensor<T>&, const Tensor<T>&,     \
                                       double, LogBase);                       \
  template long double total_loss_extended<T>(const Tensor<T>&,                \
                                              const Tensor<T>&, double,        \
                                              LogBase);                        \
  template Var<T> bce_loss<T>(const Var<T>&, const Tensor<T>&, LogBase);       \
  template Var<T> dice_loss<T>(const Var<T>&, const Tensor<T>&, double);       \
  template struct LossVars<T>;                                                 \
  template LossVars<T> total_loss<T>(const Var<T>&, const Tensor<T>&, double,  \
                                     LogBase);

PMRNET_INSTANTIATE(float)
PMRNET_INSTANTIATE(double)
PMRNET_INSTANTIATE(long double)

}  // namespace pmrnet
