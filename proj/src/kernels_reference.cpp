// Serial reference kernels. Written for obviousness, not speed: every output
// element is computed from its defining formula.
#include <cmath>

#include "pmrnet/errors.hpp"
#include "pmrnet/kernels.hpp"

namespace pmrnet::kernels::reference {

namespace {

struct Tap {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double frac = 0.0;
};

Tap source_tap(std::size_t out_index, std::size_t in_size,
               std::size_t out_size) {
  const double scale = static_cast<double>(in_size) / out_size;
  double src = (out_index + 0.5) * scale - 0.5;
  if (src < 0.0) src = 0.0;
  Tap t;
  t.lo = static_cast<std::size_t>(src);
  if (t.lo > in_size - 1) t.lo = in_size - 1;
  t.hi = t.lo + 1 < in_size ? t.lo + 1 : in_size - 1;
  t.frac = src - t.lo;
  return t;
}

}  // namespace

template <typename T>
T bilinear_sample(const T* plane, std::size_t in_h, std::size_t in_w,
                  std::size_t out_h, std::size_t out_w, std::size_t oy,
                  std::size_t ox) {
  if (in_h == out_h && in_w == out_w) return plane[oy * in_w + ox];
  const Tap ty = source_tap(oy, in_h, out_h);
  const Tap tx = source_tap(ox, in_w, out_w);
  const T wy1 = static_cast<T>(ty.frac), wy0 = T(1) - wy1;
  const T wx1 = static_cast<T>(tx.frac), wx0 = T(1) - wx1;
  const T top = wx0 * plane[ty.lo * in_w + tx.lo] + wx1 * plane[ty.lo * in_w + tx.hi];
  const T bottom = wx0 * plane[ty.hi * in_w + tx.lo] + wx1 * plane[ty.hi * in_w + tx.hi];
  return wy0 * top + wy1 * bottom;
}

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight,
                    const T* bias, int pad, Tensor<T>& y) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const long k = static_cast<long>(ws.h);
  y = Tensor<T>(Shape{xs.n, ws.n, xs.h + 2 * pad - k + 1,
                      xs.w + 2 * pad - k + 1});
  const Shape ys = y.shape();
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t o = 0; o < ws.n; ++o) {
      for (std::size_t oh = 0; oh < ys.h; ++oh) {
        for (std::size_t ow = 0; ow < ys.w; ++ow) {
          T acc = bias ? bias[o] : T(0);
          for (std::size_t c = 0; c < xs.c; ++c) {
            for (long kh = 0; kh < k; ++kh) {
              const long ih = static_cast<long>(oh) + kh - pad;
              if (ih < 0 || ih >= static_cast<long>(xs.h)) continue;
              for (long kw = 0; kw < k; ++kw) {
                const long iw = static_cast<long>(ow) + kw - pad;
                if (iw < 0 || iw >= static_cast<long>(xs.w)) continue;
                acc += weight.at(o, c, kh, kw) * x.at(n, c, ih, iw);
              }
            }
          }
          y.at(n, o, oh, ow) = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight,
                     const Tensor<T>& dy, int pad, Tensor<T>* dx,
                     Tensor<T>* dweight, T* dbias) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const Shape ys = dy.shape();
  const long k = static_cast<long>(ws.h);
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t o = 0; o < ws.n; ++o) {
      for (std::size_t oh = 0; oh < ys.h; ++oh) {
        for (std::size_t ow = 0; ow < ys.w; ++ow) {
          const T g = dy.at(n, o, oh, ow);
          if (dbias) dbias[o] += g;
          for (std::size_t c = 0; c < xs.c; ++c) {
            for (long kh = 0; kh < k; ++kh) {
              const long ih = static_cast<long>(oh) + kh - pad;
              if (ih < 0 || ih >= static_cast<long>(xs.h)) continue;
              for (long kw = 0; kw < k; ++kw) {
                const long iw = static_cast<long>(ow) + kw - pad;
                if (iw < 0 || iw >= static_cast<long>(xs.w)) continue;
                if (dweight) dweight->at(o, c, kh, kw) += g * x.at(n, c, ih, iw);
                if (dx) dx->at(n, c, ih, iw) += g * weight.at(o, c, kh, kw);
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void batchnorm_forward_train(const Tensor<T>& x, const T* gamma, const T* beta,
                             T eps, Tensor<T>& y, std::vector<T>& mean,
                             std::vector<T>& invstd, std::vector<T>& variance) {
  const Shape s = x.shape();
  const double count = static_cast<double>(s.n * s.plane());
  y = Tensor<T>(s);
  mean.assign(s.c, T(0));
  invstd.assign(s.c, T(0));
  variance.assign(s.c, T(0));
  for (std::size_t c = 0; c < s.c; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < s.plane(); ++i) sum += x.plane(n, c)[i];
    const double m = sum / count;
    double sq = 0.0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const double d = x.plane(n, c)[i] - m;
        sq += d * d;
      }
    const double is = 1.0 / std::sqrt(sq / count + static_cast<double>(eps));
    mean[c] = static_cast<T>(m);
    invstd[c] = static_cast<T>(is);
    variance[c] = static_cast<T>(sq / count);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < s.plane(); ++i)
        y.plane(n, c)[i] =
            gamma[c] * (x.plane(n, c)[i] - mean[c]) * invstd[c] + beta[c];
  }
}

template <typename T>
void batchnorm_forward_eval(const Tensor<T>& x, const T* gamma, const T* beta,
                            const T* running_mean, const T* running_var, T eps,
                            Tensor<T>& y) {
  const Shape s = x.shape();
  y = Tensor<T>(s);
  for (std::size_t c = 0; c < s.c; ++c) {
    const T is = T(1) / std::sqrt(running_var[c] + eps);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < s.plane(); ++i)
        y.plane(n, c)[i] =
            gamma[c] * (x.plane(n, c)[i] - running_mean[c]) * is + beta[c];
  }
}

template <typename T>
void batchnorm_backward(const Tensor<T>& x, const T* gamma,
                        const std::vector<T>& mean,
                        const std::vector<T>& invstd, bool batch_stats,
                        const Tensor<T>& dy, Tensor<T>* dx, T* dgamma,
                        T* dbeta) {
  const Shape s = x.shape();
  const double count = static_cast<double>(s.n * s.plane());
  for (std::size_t c = 0; c < s.c; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const double xhat =
            (static_cast<double>(x.plane(n, c)[i]) - mean[c]) * invstd[c];
        sum_dy += dy.plane(n, c)[i];
        sum_dy_xhat += dy.plane(n, c)[i] * xhat;
      }
    if (dgamma) dgamma[c] += static_cast<T>(sum_dy_xhat);
    if (dbeta) dbeta[c] += static_cast<T>(sum_dy);
    if (!dx) continue;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const double g = dy.plane(n, c)[i];
        double v;
        if (batch_stats) {
          const double xhat =
              (static_cast<double>(x.plane(n, c)[i]) - mean[c]) * invstd[c];
          v = gamma[c] * invstd[c] *
              (g - sum_dy / count - xhat * sum_dy_xhat / count);
        } else {
          v = gamma[c] * invstd[c] * g;
        }
        dx->plane(n, c)[i] += static_cast<T>(v);
      }
  }
}

template <typename T>
void relu_forward(const Tensor<T>& x, Tensor<T>& y) {
  y = Tensor<T>(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] < T(0) ? T(0) : x[i];
}

template <typename T>
void relu_backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > T(0)) dx[i] += dy[i];
}

template <typename T>
void maxpool2_forward(const Tensor<T>& x, Tensor<T>& y,
                      std::vector<std::uint32_t>& argmax) {
  const Shape s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw OddSizeError("maxpool2: odd extent " + s.extent().to_string());
  }
  y = Tensor<T>(Shape{s.n, s.c, s.h / 2, s.w / 2});
  argmax.assign(y.size(), 0);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t oh = 0; oh < s.h / 2; ++oh)
        for (std::size_t ow = 0; ow < s.w / 2; ++ow) {
          std::size_t best = x.offset(n, c, 2 * oh, 2 * ow);
          for (std::size_t dh = 0; dh < 2; ++dh)
            for (std::size_t dw = 0; dw < 2; ++dw) {
              const std::size_t idx = x.offset(n, c, 2 * oh + dh, 2 * ow + dw);
              if (x[idx] > x[best]) best = idx;
            }
          const std::size_t out = y.offset(n, c, oh, ow);
          y[out] = x[best];
          argmax[out] = static_cast<std::uint32_t>(best - x.offset(n, c, 0, 0));
        }
}

template <typename T>
void maxpool2_backward(const std::vector<std::uint32_t>& argmax,
                       const Tensor<T>& dy, Tensor<T>& dx) {
  const Shape s = dy.shape();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const std::size_t out = (n * s.c + c) * s.plane() + i;
        dx.plane(n, c)[argmax[out]] += dy[out];
      }
}

template <typename T>
void bilinear_forward(const Tensor<T>& x, Tensor<T>& y) {
  const Shape xs = x.shape();
  const Shape ys = y.shape();
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t c = 0; c < xs.c; ++c)
      for (std::size_t oy = 0; oy < ys.h; ++oy)
        for (std::size_t ox = 0; ox < ys.w; ++ox)
          y.at(n, c, oy, ox) = bilinear_sample(x.plane(n, c), xs.h, xs.w,
                                               ys.h, ys.w, oy, ox);
}

template <typename T>
void bilinear_backward(const Tensor<T>& dy, Tensor<T>& dx) {
  const Shape xs = dx.shape();
  const Shape ys = dy.shape();
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t c = 0; c < xs.c; ++c)
      for (std::size_t oy = 0; oy < ys.h; ++oy)
        for (std::size_t ox = 0; ox < ys.w; ++ox) {
          const T g = dy.at(n, c, oy, ox);
          if (xs.h == ys.h && xs.w == ys.w) {
            dx.at(n, c, oy, ox) += g;
            continue;
          }
          const Tap ty = source_tap(oy, xs.h, ys.h);
          const Tap tx = source_tap(ox, xs.w, ys.w);
          const T wy1 = static_cast<T>(ty.frac), wy0 = T(1) - wy1;
          const T wx1 = static_cast<T>(tx.frac), wx0 = T(1) - wx1;
          dx.at(n, c, ty.lo, tx.lo) += g * wy0 * wx0;
          dx.at(n, c, ty.lo, tx.hi) += g * wy0 * wx1;
          dx.at(n, c, ty.hi, tx.lo) += g * wy1 * wx0;
          dx.at(n, c, ty.hi, tx.hi) += g * wy1 * wx1;
        }
}

#define PMRNET_INSTANTIATE(T)                                                 \
  template T bilinear_sample<T>(const T*, std::size_t, std::size_t,           \
                                std::size_t, std::size_t, std::size_t,        \
                                std::size_t);                                 \
  template void conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&,         \
                                  const T*, int, Tensor<T>&);                 \
  template void conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&,        \
                                   const Tensor<T>&, int, Tensor<T>*,         \
                                   Tensor<T>*, T*);                           \
  template void batchnorm_forward_train<T>(const Tensor<T>&, const T*,        \
                                           const T*, T, Tensor<T>&,           \
                                           std::vector<T>&, std::vector<T>&,  \
                                           std::vector<T>&);                  \
  template void batchnorm_forward_eval<T>(const Tensor<T>&, const T*,         \
                                          const T*, const T*, const T*, T,    \
                                          Tensor<T>&);                        \
  template void batchnorm_backward<T>(                                        \
      const Tensor<T>&, const T*, const std::vector<T>&,                      \
      const std::vector<T>&, bool, const Tensor<T>&, Tensor<T>*, T*, T*);     \
  template void relu_forward<T>(const Tensor<T>&, Tensor<T>&);                \
  template void relu_backward<T>(const Tensor<T>&, const Tensor<T>&,          \
                                 Tensor<T>&);                                 \
  template void maxpool2_forward<T>(const Tensor<T>&, Tensor<T>&,             \
                                    std::vector<std::uint32_t>&);             \
  template void maxpool2_backward<T>(const std::vector<std::uint32_t>&,       \
                                     const Tensor<T>&, Tensor<T>&);           \
  template void bilinear_forward<T>(const Tensor<T>&, Tensor<T>&);            \
  template void bilinear_backward<T>(const Tensor<T>&, Tensor<T>&);

PMRNET_INSTANTIATE(float)
PMRNET_INSTANTIATE(double)
PMRNET_INSTANTIATE(long double)
#undef PMRNET_INSTANTIATE

}  // namespace pmrnet::kernels::reference
