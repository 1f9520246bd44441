#pragma once

#include <cstdint>
#include <vector>

#include "pmrnet/tensor.hpp"

// Numeric kernels behind the autograd ops.
//
// Two implementations share one signature set:
//   pmrnet::kernels            OpenMP-parallel, im2col/blocked loops
//   pmrnet::kernels::reference straightforward serial loops
//
// The reference set exists for testing and benchmarking; the model only ever
// calls the parallel set. Every parallel loop partitions its outputs so that
// each element is written by exactly one thread with a fixed summation order,
// which keeps results bit-identical for any thread count.
//
// Conventions:
//   * convolution weights are (out, in, k, k), stride 1, zero padding `pad`
//   * backward kernels ACCUMULATE into their gradient outputs; a null output
//     pointer skips that gradient
//   * bilinear resize uses half-pixel centres (no corner alignment)
//   * maxpool is 2x2 with stride 2; ties go to the first element in
//     row-major window order
namespace pmrnet::kernels {

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight,
                    const T* bias, int pad, Tensor<T>& y);

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight,
                     const Tensor<T>& dy, int pad, Tensor<T>* dx,
                     Tensor<T>* dweight, T* dbias);

// Training-mode batch norm. Writes the per-channel batch mean and inverse
// standard deviation (biased variance) for the backward pass.
template <typename T>
void batchnorm_forward_train(const Tensor<T>& x, const T* gamma, const T* beta,
                             T eps, Tensor<T>& y, std::vector<T>& mean,
                             std::vector<T>& invstd, std::vector<T>& variance);

template <typename T>
void batchnorm_forward_eval(const Tensor<T>& x, const T* gamma, const T* beta,
                            const T* running_mean, const T* running_var, T eps,
                            Tensor<T>& y);

// Backward for either mode. `batch_stats` selects whether mean/invstd were
// batch statistics (training) or constants (evaluation).
template <typename T>
void batchnorm_backward(const Tensor<T>& x, const T* gamma,
                        const std::vector<T>& mean,
                        const std::vector<T>& invstd, bool batch_stats,
                        const Tensor<T>& dy, Tensor<T>* dx, T* dgamma,
                        T* dbeta);

template <typename T>
void relu_forward(const Tensor<T>& x, Tensor<T>& y);

template <typename T>
void relu_backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx);

template <typename T>
void maxpool2_forward(const Tensor<T>& x, Tensor<T>& y,
                      std::vector<std::uint32_t>& argmax);

template <typename T>
void maxpool2_backward(const std::vector<std::uint32_t>& argmax,
                       const Tensor<T>& dy, Tensor<T>& dx);

// Resize every plane of x to y's extent.
template <typename T>
void bilinear_forward(const Tensor<T>& x, Tensor<T>& y);

template <typename T>
void bilinear_backward(const Tensor<T>& dy, Tensor<T>& dx);

}  // namespace pmrnet::kernels

namespace pmrnet::kernels::reference {

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight,
                    const T* bias, int pad, Tensor<T>& y);

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight,
                     const Tensor<T>& dy, int pad, Tensor<T>* dx,
                     Tensor<T>* dweight, T* dbias);

template <typename T>
void batchnorm_forward_train(const Tensor<T>& x, const T* gamma, const T* beta,
                             T eps, Tensor<T>& y, std::vector<T>& mean,
                             std::vector<T>& invstd, std::vector<T>& variance);

template <typename T>
void batchnorm_forward_eval(const Tensor<T>& x, const T* gamma, const T* beta,
                            const T* running_mean, const T* running_var, T eps,
                            Tensor<T>& y);

template <typename T>
void batchnorm_backward(const Tensor<T>& x, const T* gamma,
                        const std::vector<T>& mean,
                        const std::vector<T>& invstd, bool batch_stats,
                        const Tensor<T>& dy, Tensor<T>* dx, T* dgamma,
                        T* dbeta);

template <typename T>
void relu_forward(const Tensor<T>& x, Tensor<T>& y);

template <typename T>
void relu_backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx);

template <typename T>
void maxpool2_forward(const Tensor<T>& x, Tensor<T>& y,
                      std::vector<std::uint32_t>& argmax);

template <typename T>
void maxpool2_backward(const std::vector<std::uint32_t>& argmax,
                       const Tensor<T>& dy, Tensor<T>& dx);

template <typename T>
void bilinear_forward(const Tensor<T>& x, Tensor<T>& y);

template <typename T>
void bilinear_backward(const Tensor<T>& dy, Tensor<T>& dx);

// Scalar bilinear sample at output pixel (oy, ox) of an out_h x out_w
// resize, half-pixel convention. Shared by the reference resize kernels.
template <typename T>
T bilinear_sample(const T* plane, std::size_t in_h, std::size_t in_w,
                  std::size_t out_h, std::size_t out_w, std::size_t oy,
                  std::size_t ox);

}  // namespace pmrnet::kernels::reference
