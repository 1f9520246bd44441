#include "pmrnet/ops.hpp"

#include <algorithm>
#include <cmath>

#include "pmrnet/errors.hpp"
#include "pmrnet/kernels.hpp"

namespace pmrnet::ops {

namespace {

template <typename T>
void trace_relu(const Tensor<T>& x) {
  KinkTrace* trace = active_kink_trace();
  if (!trace) return;
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    word = (word << 1) | (x[i] > T(0) ? 1U : 0U);
    if (i % 64 == 63) {
      trace->mix(word);
      word = 0;
    }
  }
  trace->mix(word);
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              int pad) {
  const Shape ws = weight->shape();
  if (x->shape().c != ws.c) {
    throw ShapeError("conv2d: input has " + std::to_string(x->shape().c) +
                     " channels, weight expects " + std::to_string(ws.c));
  }
  Tensor<T> y;
  kernels::conv2d_forward(x->value, weight->value,
                          bias ? bias->value.data() : nullptr, pad, y);
  std::vector<Var<T>> inputs{x, weight};
  if (bias) inputs.push_back(bias);
  return make_op<T>("conv2d", std::move(y), std::move(inputs),
                    [pad](Node<T>& self) {
                      Node<T>& in = *self.inputs[0];
                      Node<T>& w = *self.inputs[1];
                      Node<T>* b = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
                      kernels::conv2d_backward(
                          in.value, w.value, self.grad, pad,
                          in.requires_grad ? &in.grad_buffer() : nullptr,
                          w.requires_grad ? &w.grad_buffer() : nullptr,
                          b && b->requires_grad ? b->grad_buffer().data() : nullptr);
                    });
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  BatchNormStats<T>& stats, bool training, T momentum, T eps) {
  const Shape s = x->shape();
  if (gamma->value.size() != s.c || beta->value.size() != s.c) {
    throw ShapeError("batch_norm: parameter size does not match " +
                     std::to_string(s.c) + " channels");
  }
  Tensor<T> y;
  std::vector<T> mean, invstd, variance;
  if (training) {
    kernels::batchnorm_forward_train(x->value, gamma->value.data(),
                                     beta->value.data(), eps, y, mean, invstd,
                                     variance);
    const double count = static_cast<double>(s.n * s.plane());
    const double unbias = count > 1 ? count / (count - 1) : 1.0;
    T* rm = stats.running_mean->value.data();
    T* rv = stats.running_var->value.data();
    for (std::size_t c = 0; c < s.c; ++c) {
      rm[c] = (T(1) - momentum) * rm[c] + momentum * mean[c];
      rv[c] = (T(1) - momentum) * rv[c] +
              momentum * static_cast<T>(variance[c] * unbias);
    }
  } else {
    const T* rm = stats.running_mean->value.data();
    const T* rv = stats.running_var->value.data();
    kernels::batchnorm_forward_eval(x->value, gamma->value.data(),
                                    beta->value.data(), rm, rv, eps, y);
    mean.assign(rm, rm + s.c);
    invstd.resize(s.c);
    for (std::size_t c = 0; c < s.c; ++c) invstd[c] = T(1) / std::sqrt(rv[c] + eps);
  }
  return make_op<T>(
      "batch_norm", std::move(y), {x, gamma, beta},
      [mean = std::move(mean), invstd = std::move(invstd), training](Node<T>& self) {
        Node<T>& in = *self.inputs[0];
        Node<T>& g = *self.inputs[1];
        Node<T>& b = *self.inputs[2];
        kernels::batchnorm_backward(
            in.value, g.value.data(), mean, invstd, training, self.grad,
            in.requires_grad ? &in.grad_buffer() : nullptr,
            g.requires_grad ? g.grad_buffer().data() : nullptr,
            b.requires_grad ? b.grad_buffer().data() : nullptr);
      });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> y;
  kernels::relu_forward(x->value, y);
  trace_relu(x->value);
  return make_op<T>("relu", std::move(y), {x}, [](Node<T>& self) {
    Node<T>& in = *self.inputs[0];
    kernels::relu_backward(in.value, self.grad, in.grad_buffer());
  });
}

template <typename T>
Var<T> max_pool2(const Var<T>& x) {
  Tensor<T> y;
  std::vector<std::uint32_t> argmax;
  kernels::maxpool2_forward(x->value, y, argmax);
  if (KinkTrace* trace = active_kink_trace()) {
    for (std::uint32_t a : argmax) trace->mix(a);
  }
  return make_op<T>("max_pool2", std::move(y), {x},
                    [argmax = std::move(argmax)](Node<T>& self) {
                      Node<T>& in = *self.inputs[0];
                      kernels::maxpool2_backward(argmax, self.grad,
                                                 in.grad_buffer());
                    });
}

template <typename T>
Var<T> resize_bilinear(const Var<T>& x, Extent target) {
  const Shape s = x->shape();
  if (target.height == 0 || target.width == 0) {
    throw ShapeError("resize_bilinear: empty target extent");
  }
  if (s.extent() == target) return x;
  Tensor<T> y(Shape{s.n, s.c, target.height, target.width});
  kernels::bilinear_forward(x->value, y);
  return make_op<T>("resize", std::move(y), {x}, [](Node<T>& self) {
    Node<T>& in = *self.inputs[0];
    kernels::bilinear_backward(self.grad, in.grad_buffer());
  });
}

template <typename T>
Var<T> concat(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (parts.size() == 1) return parts.front();
  const Shape first = parts.front()->shape();
  std::size_t channels = 0;
  for (const auto& p : parts) {
    const Shape s = p->shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat: " + s.to_string() + " does not align with " +
                       first.to_string());
    }
    channels += s.c;
  }
  Tensor<T> y(Shape{first.n, channels, first.h, first.w});
  const std::size_t plane = first.plane();
  for (std::size_t n = 0; n < first.n; ++n) {
    std::size_t c0 = 0;
    for (const auto& p : parts) {
      const std::size_t c = p->shape().c;
      std::copy(p->value.plane(n, 0), p->value.plane(n, 0) + c * plane,
                y.plane(n, c0));
      c0 += c;
    }
  }
  return make_op<T>("concat", std::move(y),
                    std::vector<Var<T>>(parts.begin(), parts.end()),
                    [](Node<T>& self) {
                      const Shape s = self.value.shape();
                      const std::size_t plane = s.plane();
                      for (std::size_t n = 0; n < s.n; ++n) {
                        std::size_t c0 = 0;
                        for (auto& p : self.inputs) {
                          const std::size_t c = p->shape().c;
                          if (p->requires_grad) {
                            T* dst = p->grad_buffer().plane(n, 0);
                            const T* src = self.grad.plane(n, c0);
                            for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
                          }
                          c0 += c;
                        }
                      }
                    });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> y(x->shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T v = x->value[i];
    // Split by sign so exp never overflows.
    if (v >= T(0)) {
      y[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      y[i] = e / (T(1) + e);
    }
  }
  return make_op<T>("sigmoid", std::move(y), {x}, [](Node<T>& self) {
    Tensor<T>& dx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const T p = self.value[i];
      dx[i] += self.grad[i] * p * (T(1) - p);
    }
  });
}

template <typename T>
Var<T> weighted_sum(const Var<T>& a, T wa, const Var<T>& b, T wb) {
  if (a->value.size() != 1 || b->value.size() != 1) {
    throw ShapeError("weighted_sum: operands must be scalars");
  }
  Tensor<T> y(Shape{1, 1, 1, 1});
  y[0] = wa * a->value[0] + wb * b->value[0];
  return make_op<T>("weighted_sum", std::move(y), {a, b},
                    [wa, wb](Node<T>& self) {
                      if (self.inputs[0]->requires_grad)
                        self.inputs[0]->grad_buffer()[0] += wa * self.grad[0];
                      if (self.inputs[1]->requires_grad)
                        self.inputs[1]->grad_buffer()[0] += wb * self.grad[0];
                    });
}

#define PMRNET_INSTANTIATE(T)                                                  \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, int); \
  template Var<T> batch_norm<T>(const Var<T>&, const Var<T>&, const Var<T>&,   \
                                BatchNormStats<T>&, bool, T, T);               \
  template Var<T> relu<T>(const Var<T>&);                                      \
  template Var<T> max_pool2<T>(const Var<T>&);                                 \
  template Var<T> resize_bilinear<T>(const Var<T>&, Extent);                   \
  template Var<T> concat<T>(std::span<const Var<T>>);                          \
  template Var<T> sigmoid<T>(const Var<T>&);                                   \
  template Var<T> weighted_sum<T>(const Var<T>&, T, const Var<T>&, T);

PMRNET_INSTANTIATE(float)
PMRNET_INSTANTIATE(double)
PMRNET_INSTANTIATE(long double)
#undef PMRNET_INSTANTIATE

}  // namespace pmrnet::ops
