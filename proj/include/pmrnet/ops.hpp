#pragma once

#include <span>
#include <vector>

#include "pmrnet/autograd.hpp"

// Differentiable ops on Var. Shapes are validated here; numeric work is
// delegated to pmrnet::kernels.
namespace pmrnet::ops {

// Stride-1 convolution with zero padding; bias may be null.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              int pad);

// Running statistics owned by a batch-norm layer.
template <typename T>
struct BatchNormStats {
  Var<T> running_mean;
  Var<T> running_var;
};

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  BatchNormStats<T>& stats, bool training, T momentum, T eps);

template <typename T>
Var<T> relu(const Var<T>& x);

// 2x2 max pooling, stride 2. Throws OddSizeError on odd extents.
template <typename T>
Var<T> max_pool2(const Var<T>& x);

// Bilinear resize, half-pixel centres. Same-size resize returns x itself.
template <typename T>
Var<T> resize_bilinear(const Var<T>& x, Extent target);

// Channel concatenation in the given order. Throws ShapeError when batch or
// spatial extents disagree. A single input is returned unchanged.
template <typename T>
Var<T> concat(std::span<const Var<T>> parts);

template <typename T>
Var<T> concat(std::initializer_list<Var<T>> parts) {
  std::vector<Var<T>> v(parts);
  return concat<T>(std::span<const Var<T>>(v));
}

template <typename T>
Var<T> sigmoid(const Var<T>& x);

// wa * a + wb * b for scalar (1x1x1x1) vars.
template <typename T>
Var<T> weighted_sum(const Var<T>& a, T wa, const Var<T>& b, T wb);

}  // namespace pmrnet::ops
