// OpenMP kernels. Convolution is lowered to im2col over row tiles followed
// by register-blocked matrix products; each parallel loop owns disjoint
// output rows so no reduction crosses a thread boundary.
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <type_traits>

#include "pmrnet/errors.hpp"
#include "pmrnet/kernels.hpp"

namespace pmrnet::kernels {

namespace {

using Index = std::ptrdiff_t;

// Reduction accumulator: at least double, wider when T is.
template <typename T>
using Acc = std::conditional_t<(sizeof(T) > sizeof(double)), T, double>;

constexpr std::size_t kChunk = 256;
// Upper bound on im2col tile elements; keeps the lowered matrix cache sized.
constexpr std::size_t kTileBudget = std::size_t{1} << 20;

// C(m, p) (+)= sum_k A(m, k) * B(k, p) with A addressed through strides so the
// same routine serves W * col and W^T * dy.
template <typename T>
void gemm(std::size_t M, std::size_t N, std::size_t K, const T* A,
          std::size_t a_row, std::size_t a_col, const T* B, std::size_t ldb,
          T* C, std::size_t ldc, bool accumulate) {
  const Index blocks = static_cast<Index>((M + 3) / 4);
#pragma omp parallel for schedule(static)
  for (Index blk = 0; blk < blocks; ++blk) {
    const std::size_t m0 = static_cast<std::size_t>(blk) * 4;
    const std::size_t mr = std::min<std::size_t>(4, M - m0);
    alignas(64) T acc[4][kChunk];
    for (std::size_t p0 = 0; p0 < N; p0 += kChunk) {
      const std::size_t np = std::min(kChunk, N - p0);
      for (std::size_t r = 0; r < mr; ++r) {
        T* row = C + (m0 + r) * ldc + p0;
        for (std::size_t p = 0; p < np; ++p) acc[r][p] = accumulate ? row[p] : T(0);
      }
      if (mr == 4) {
        for (std::size_t k = 0; k < K; ++k) {
          const T* b = B + k * ldb + p0;
          const T a0 = A[m0 * a_row + k * a_col];
          const T a1 = A[(m0 + 1) * a_row + k * a_col];
          const T a2 = A[(m0 + 2) * a_row + k * a_col];
          const T a3 = A[(m0 + 3) * a_row + k * a_col];
#pragma omp simd
          for (std::size_t p = 0; p < np; ++p) {
            acc[0][p] += a0 * b[p];
            acc[1][p] += a1 * b[p];
            acc[2][p] += a2 * b[p];
            acc[3][p] += a3 * b[p];
          }
        }
      } else {
        for (std::size_t k = 0; k < K; ++k) {
          const T* b = B + k * ldb + p0;
          for (std::size_t r = 0; r < mr; ++r) {
            const T a = A[(m0 + r) * a_row + k * a_col];
#pragma omp simd
            for (std::size_t p = 0; p < np; ++p) acc[r][p] += a * b[p];
          }
        }
      }
      for (std::size_t r = 0; r < mr; ++r) {
        T* row = C + (m0 + r) * ldc + p0;
        for (std::size_t p = 0; p < np; ++p) row[p] = acc[r][p];
      }
    }
  }
}

// C(m, k) += sum_p A(m, p) * B(k, p). Used for weight gradients.
template <typename T>
void gemm_abt(std::size_t M, std::size_t N, std::size_t P, const T* A,
              std::size_t lda, const T* B, std::size_t ldb, T* C,
              std::size_t ldc) {
#pragma omp parallel for schedule(static)
  for (Index mi = 0; mi < static_cast<Index>(M); ++mi) {
    const std::size_t m = static_cast<std::size_t>(mi);
    const T* a = A + m * lda;
    std::size_t k = 0;
    for (; k + 4 <= N; k += 4) {
      const T* b0 = B + k * ldb;
      const T* b1 = b0 + ldb;
      const T* b2 = b1 + ldb;
      const T* b3 = b2 + ldb;
      T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
#pragma omp simd reduction(+ : s0, s1, s2, s3)
      for (std::size_t p = 0; p < P; ++p) {
        s0 += a[p] * b0[p];
        s1 += a[p] * b1[p];
        s2 += a[p] * b2[p];
        s3 += a[p] * b3[p];
      }
      C[m * ldc + k] += s0;
      C[m * ldc + k + 1] += s1;
      C[m * ldc + k + 2] += s2;
      C[m * ldc + k + 3] += s3;
    }
    for (; k < N; ++k) {
      const T* b = B + k * ldb;
      T s = 0;
#pragma omp simd reduction(+ : s)
      for (std::size_t p = 0; p < P; ++p) s += a[p] * b[p];
      C[m * ldc + k] += s;
    }
  }
}

struct ConvGeometry {
  std::size_t channels, in_h, in_w, out_h, out_w, k;
  int pad;

  std::size_t rows() const { return channels * k * k; }
  bool pointwise() const { return k == 1 && pad == 0; }
};

// Lower output rows [h0, h1) of one image into col (rows() x (h1-h0)*out_w).
template <typename T>
void im2col(const T* image, const ConvGeometry& g, std::size_t h0,
            std::size_t h1, T* col) {
  const std::size_t tile = (h1 - h0) * g.out_w;
  const Index rows = static_cast<Index>(g.rows());
#pragma omp parallel for schedule(static)
  for (Index ri = 0; ri < rows; ++ri) {
    const std::size_t r = static_cast<std::size_t>(ri);
    const std::size_t c = r / (g.k * g.k);
    const long kh = static_cast<long>((r / g.k) % g.k);
    const long kw = static_cast<long>(r % g.k);
    const T* plane = image + c * g.in_h * g.in_w;
    T* dst = col + r * tile;
    for (std::size_t oh = h0; oh < h1; ++oh) {
      const long ih = static_cast<long>(oh) + kh - g.pad;
      T* out = dst + (oh - h0) * g.out_w;
      if (ih < 0 || ih >= static_cast<long>(g.in_h)) {
        std::fill(out, out + g.out_w, T(0));
        continue;
      }
      const T* src = plane + ih * g.in_w;
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        const long iw = static_cast<long>(ow) + kw - g.pad;
        out[ow] = (iw >= 0 && iw < static_cast<long>(g.in_w)) ? src[iw] : T(0);
      }
    }
  }
}

// Scatter-add col tile back into one image gradient. Parallel over channels:
// the k*k rows of a channel only touch that channel's plane.
template <typename T>
void col2im(const T* col, const ConvGeometry& g, std::size_t h0,
            std::size_t h1, T* image) {
  const std::size_t tile = (h1 - h0) * g.out_w;
#pragma omp parallel for schedule(static)
  for (Index ci = 0; ci < static_cast<Index>(g.channels); ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    T* plane = image + c * g.in_h * g.in_w;
    for (std::size_t kk = 0; kk < g.k * g.k; ++kk) {
      const long kh = static_cast<long>(kk / g.k);
      const long kw = static_cast<long>(kk % g.k);
      const T* src = col + (c * g.k * g.k + kk) * tile;
      for (std::size_t oh = h0; oh < h1; ++oh) {
        const long ih = static_cast<long>(oh) + kh - g.pad;
        if (ih < 0 || ih >= static_cast<long>(g.in_h)) continue;
        const T* in = src + (oh - h0) * g.out_w;
        T* dst = plane + ih * g.in_w;
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
          const long iw = static_cast<long>(ow) + kw - g.pad;
          if (iw >= 0 && iw < static_cast<long>(g.in_w)) dst[iw] += in[ow];
        }
      }
    }
  }
}

std::size_t tile_rows(const ConvGeometry& g) {
  const std::size_t per_row = std::max<std::size_t>(1, g.rows() * g.out_w);
  return std::clamp<std::size_t>(kTileBudget / per_row, 1, g.out_h);
}

ConvGeometry geometry(const Shape& xs, const Shape& ws, int pad) {
  if (ws.c != xs.c || ws.h != ws.w) {
    throw ShapeError("conv2d: weight " + ws.to_string() + " vs input " +
                     xs.to_string());
  }
  const long oh = static_cast<long>(xs.h) + 2 * pad - static_cast<long>(ws.h) + 1;
  const long ow = static_cast<long>(xs.w) + 2 * pad - static_cast<long>(ws.w) + 1;
  if (oh <= 0 || ow <= 0) throw ShapeError("conv2d: empty output");
  return {xs.c, xs.h, xs.w, static_cast<std::size_t>(oh),
          static_cast<std::size_t>(ow), ws.h, pad};
}

// Coordinate table for one resize axis, half-pixel centres.
struct AxisTaps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

AxisTaps axis_taps(std::size_t in, std::size_t out) {
  AxisTaps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (std::size_t o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    std::size_t lo = std::min(static_cast<std::size_t>(src), in - 1);
    t.lo[o] = lo;
    t.hi[o] = lo + 1 < in ? lo + 1 : in - 1;
    t.frac[o] = src - lo;
  }
  return t;
}

}  // namespace

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight,
                    const T* bias, int pad, Tensor<T>& y) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const ConvGeometry g = geometry(xs, ws, pad);
  y = Tensor<T>(Shape{xs.n, ws.n, g.out_h, g.out_w});
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t rows_per_tile = tile_rows(g);
  std::vector<T> col;
  if (!g.pointwise()) col.resize(g.rows() * rows_per_tile * g.out_w);
  for (std::size_t n = 0; n < xs.n; ++n) {
    const T* image = x.plane(n, 0);
    T* out = y.plane(n, 0);
    if (bias) {
#pragma omp parallel for schedule(static)
      for (Index o = 0; o < static_cast<Index>(ws.n); ++o)
        std::fill(out + o * out_plane, out + (o + 1) * out_plane, bias[o]);
    }
    for (std::size_t h0 = 0; h0 < g.out_h; h0 += rows_per_tile) {
      const std::size_t h1 = std::min(g.out_h, h0 + rows_per_tile);
      const std::size_t tile = (h1 - h0) * g.out_w;
      const T* b;
      std::size_t ldb;
      if (g.pointwise()) {
        b = image + h0 * g.out_w;
        ldb = out_plane;
      } else {
        im2col(image, g, h0, h1, col.data());
        b = col.data();
        ldb = tile;
      }
      gemm(ws.n, tile, g.rows(), weight.data(), g.rows(), std::size_t{1}, b,
           ldb, out + h0 * g.out_w, out_plane, bias != nullptr);
    }
  }
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight,
                     const Tensor<T>& dy, int pad, Tensor<T>* dx,
                     Tensor<T>* dweight, T* dbias) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const ConvGeometry g = geometry(xs, ws, pad);
  const std::size_t out_plane = g.out_h * g.out_w;
  if (dbias) {
#pragma omp parallel for schedule(static)
    for (Index o = 0; o < static_cast<Index>(ws.n); ++o) {
      T s = 0;
      for (std::size_t n = 0; n < xs.n; ++n) {
        const T* g_plane = dy.plane(n, static_cast<std::size_t>(o));
        for (std::size_t i = 0; i < out_plane; ++i) s += g_plane[i];
      }
      dbias[o] += s;
    }
  }
  if (!dx && !dweight) return;
  const std::size_t rows_per_tile = tile_rows(g);
  std::vector<T> col, dcol;
  if (!g.pointwise()) {
    if (dweight) col.resize(g.rows() * rows_per_tile * g.out_w);
    if (dx) dcol.resize(g.rows() * rows_per_tile * g.out_w);
  }
  for (std::size_t n = 0; n < xs.n; ++n) {
    const T* image = x.plane(n, 0);
    const T* grad_out = dy.plane(n, 0);
    for (std::size_t h0 = 0; h0 < g.out_h; h0 += rows_per_tile) {
      const std::size_t h1 = std::min(g.out_h, h0 + rows_per_tile);
      const std::size_t tile = (h1 - h0) * g.out_w;
      const T* gy = grad_out + h0 * g.out_w;
      if (dweight) {
        const T* b;
        std::size_t ldb;
        if (g.pointwise()) {
          b = image + h0 * g.out_w;
          ldb = out_plane;
        } else {
          im2col(image, g, h0, h1, col.data());
          b = col.data();
          ldb = tile;
        }
        gemm_abt(ws.n, g.rows(), tile, gy, out_plane, b, ldb, dweight->data(),
                 g.rows());
      }
      if (dx) {
        if (g.pointwise()) {
          gemm(g.rows(), tile, ws.n, weight.data(), std::size_t{1}, g.rows(), gy,
               out_plane, dx->plane(n, 0) + h0 * g.out_w, out_plane, true);
        } else {
          gemm(g.rows(), tile, ws.n, weight.data(), std::size_t{1}, g.rows(), gy,
               out_plane, dcol.data(), tile, false);
          col2im(dcol.data(), g, h0, h1, dx->plane(n, 0));
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
  const Acc<T> count = static_cast<Acc<T>>(s.n * s.plane());
  y = Tensor<T>(s);
  mean.assign(s.c, T(0));
  invstd.assign(s.c, T(0));
  variance.assign(s.c, T(0));
#pragma omp parallel for schedule(static)
  for (Index ci = 0; ci < static_cast<Index>(s.c); ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    Acc<T> sum = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) sum += p[i];
    }
    const Acc<T> m = sum / count;
    Acc<T> sq = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const Acc<T> d = p[i] - m;
        sq += d * d;
      }
    }
    mean[c] = static_cast<T>(m);
    variance[c] = static_cast<T>(sq / count);
    invstd[c] = static_cast<T>(Acc<T>(1) / std::sqrt(sq / count + static_cast<Acc<T>>(eps)));
    const T scale = gamma[c] * invstd[c];
    const T shift = beta[c] - mean[c] * scale;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      T* q = y.plane(n, c);
#pragma omp simd
      for (std::size_t i = 0; i < s.plane(); ++i) q[i] = p[i] * scale + shift;
    }
  }
}

template <typename T>
void batchnorm_forward_eval(const Tensor<T>& x, const T* gamma, const T* beta,
                            const T* running_mean, const T* running_var, T eps,
                            Tensor<T>& y) {
  const Shape s = x.shape();
  y = Tensor<T>(s);
#pragma omp parallel for schedule(static)
  for (Index ci = 0; ci < static_cast<Index>(s.c); ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    const T scale = gamma[c] / std::sqrt(running_var[c] + eps);
    const T shift = beta[c] - running_mean[c] * scale;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      T* q = y.plane(n, c);
#pragma omp simd
      for (std::size_t i = 0; i < s.plane(); ++i) q[i] = p[i] * scale + shift;
    }
  }
}

template <typename T>
void batchnorm_backward(const Tensor<T>& x, const T* gamma,
                        const std::vector<T>& mean,
                        const std::vector<T>& invstd, bool batch_stats,
                        const Tensor<T>& dy, Tensor<T>* dx, T* dgamma,
                        T* dbeta) {
  const Shape s = x.shape();
  const Acc<T> count = static_cast<Acc<T>>(s.n * s.plane());
#pragma omp parallel for schedule(static)
  for (Index ci = 0; ci < static_cast<Index>(s.c); ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    const Acc<T> m = mean[c];
    const Acc<T> is = invstd[c];
    Acc<T> sum_dy = 0, sum_dy_xhat = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      const T* g = dy.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) {
        sum_dy += g[i];
        sum_dy_xhat += g[i] * ((p[i] - m) * is);
      }
    }
    if (dgamma) dgamma[c] += static_cast<T>(sum_dy_xhat);
    if (dbeta) dbeta[c] += static_cast<T>(sum_dy);
    if (!dx) continue;
    const Acc<T> k = gamma[c] * is;
    const Acc<T> mean_dy = batch_stats ? sum_dy / count : Acc<T>(0);
    const Acc<T> mean_dy_xhat = batch_stats ? sum_dy_xhat / count : Acc<T>(0);
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      const T* g = dy.plane(n, c);
      T* d = dx->plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const Acc<T> xhat = (p[i] - m) * is;
        d[i] += static_cast<T>(k * (g[i] - mean_dy - xhat * mean_dy_xhat));
      }
    }
  }
}

template <typename T>
void relu_forward(const Tensor<T>& x, Tensor<T>& y) {
  y = Tensor<T>(x.shape());
  const T* p = x.data();
  T* q = y.data();
  const Index n = static_cast<Index>(x.size());
#pragma omp parallel for simd schedule(static)
  for (Index i = 0; i < n; ++i) q[i] = p[i] < T(0) ? T(0) : p[i];  // NaN passes through
}

template <typename T>
void relu_backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx) {
  const T* p = x.data();
  const T* g = dy.data();
  T* d = dx.data();
  const Index n = static_cast<Index>(x.size());
#pragma omp parallel for simd schedule(static)
  for (Index i = 0; i < n; ++i) d[i] += p[i] > T(0) ? g[i] : T(0);
}

template <typename T>
void maxpool2_forward(const Tensor<T>& x, Tensor<T>& y,
                      std::vector<std::uint32_t>& argmax) {
  const Shape s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw OddSizeError("maxpool2: odd extent " + s.extent().to_string());
  }
  const std::size_t oh = s.h / 2, ow = s.w / 2;
  y = Tensor<T>(Shape{s.n, s.c, oh, ow});
  argmax.assign(y.size(), 0);
  const Index planes = static_cast<Index>(s.n * s.c);
#pragma omp parallel for schedule(static)
  for (Index pi = 0; pi < planes; ++pi) {
    const std::size_t pl = static_cast<std::size_t>(pi);
    const T* in = x.data() + pl * s.plane();
    T* out = y.data() + pl * oh * ow;
    std::uint32_t* arg = argmax.data() + pl * oh * ow;
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t q = 0; q < ow; ++q) {
        const std::size_t base = 2 * r * s.w + 2 * q;
        const std::size_t cand[4] = {base, base + 1, base + s.w, base + s.w + 1};
        std::size_t best = cand[0];
        for (int t = 1; t < 4; ++t)
          if (in[cand[t]] > in[best]) best = cand[t];
        out[r * ow + q] = in[best];
        arg[r * ow + q] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

template <typename T>
void maxpool2_backward(const std::vector<std::uint32_t>& argmax,
                       const Tensor<T>& dy, Tensor<T>& dx) {
  const Shape s = dy.shape();
  const std::size_t in_plane = dx.shape().plane();
  const Index planes = static_cast<Index>(s.n * s.c);
#pragma omp parallel for schedule(static)
  for (Index pi = 0; pi < planes; ++pi) {
    const std::size_t pl = static_cast<std::size_t>(pi);
    const T* g = dy.data() + pl * s.plane();
    const std::uint32_t* arg = argmax.data() + pl * s.plane();
    T* d = dx.data() + pl * in_plane;
    for (std::size_t i = 0; i < s.plane(); ++i) d[arg[i]] += g[i];
  }
}

template <typename T>
void bilinear_forward(const Tensor<T>& x, Tensor<T>& y) {
  const Shape xs = x.shape();
  const Shape ys = y.shape();
  const Index planes = static_cast<Index>(xs.n * xs.c);
  if (xs.h == ys.h && xs.w == ys.w) {
    std::copy(x.data(), x.data() + x.size(), y.data());
    return;
  }
  const AxisTaps ty = axis_taps(xs.h, ys.h);
  const AxisTaps tx = axis_taps(xs.w, ys.w);
#pragma omp parallel for schedule(static)
  for (Index pi = 0; pi < planes; ++pi) {
    const std::size_t pl = static_cast<std::size_t>(pi);
    const T* in = x.data() + pl * xs.plane();
    T* out = y.data() + pl * ys.plane();
    for (std::size_t oy = 0; oy < ys.h; ++oy) {
      const T wy1 = static_cast<T>(ty.frac[oy]), wy0 = T(1) - wy1;
      const T* r0 = in + ty.lo[oy] * xs.w;
      const T* r1 = in + ty.hi[oy] * xs.w;
      for (std::size_t ox = 0; ox < ys.w; ++ox) {
        const T wx1 = static_cast<T>(tx.frac[ox]), wx0 = T(1) - wx1;
        const T top = wx0 * r0[tx.lo[ox]] + wx1 * r0[tx.hi[ox]];
        const T bottom = wx0 * r1[tx.lo[ox]] + wx1 * r1[tx.hi[ox]];
        out[oy * ys.w + ox] = wy0 * top + wy1 * bottom;
      }
    }
  }
}

template <typename T>
void bilinear_backward(const Tensor<T>& dy, Tensor<T>& dx) {
  const Shape xs = dx.shape();
  const Shape ys = dy.shape();
  const Index planes = static_cast<Index>(xs.n * xs.c);
  if (xs.h == ys.h && xs.w == ys.w) {
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
    return;
  }
  const AxisTaps ty = axis_taps(xs.h, ys.h);
  const AxisTaps tx = axis_taps(xs.w, ys.w);
#pragma omp parallel for schedule(static)
  for (Index pi = 0; pi < planes; ++pi) {
    const std::size_t pl = static_cast<std::size_t>(pi);
    const T* g = dy.data() + pl * ys.plane();
    T* d = dx.data() + pl * xs.plane();
    for (std::size_t oy = 0; oy < ys.h; ++oy) {
      const T wy1 = static_cast<T>(ty.frac[oy]), wy0 = T(1) - wy1;
      T* r0 = d + ty.lo[oy] * xs.w;
      T* r1 = d + ty.hi[oy] * xs.w;
      for (std::size_t ox = 0; ox < ys.w; ++ox) {
        const T v = g[oy * ys.w + ox];
        const T wx1 = static_cast<T>(tx.frac[ox]), wx0 = T(1) - wx1;
        r0[tx.lo[ox]] += v * wy0 * wx0;
        r0[tx.hi[ox]] += v * wy0 * wx1;
        r1[tx.lo[ox]] += v * wy1 * wx0;
        r1[tx.hi[ox]] += v * wy1 * wx1;
      }
    }
  }
}

#define PMRNET_INSTANTIATE(T)                                                 \
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

}  // namespace pmrnet::kernels
