#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <vector>

#include "pmrnet/kernels.hpp"
#include "test_support.hpp"

namespace pmrnet {
namespace {

using testing::random_tensor;
namespace k = kernels;
namespace ref = kernels::reference;

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

// Independent scalar interpolator: half-pixel centres, edge clamped.
double bilinear_oracle(const std::vector<double>& img, int h, int w, int oh,
                       int ow, int oy, int ox) {
  const double sy = (oy + 0.5) * h / oh - 0.5;
  const double sx = (ox + 0.5) * w / ow - 0.5;
  auto at = [&](int y, int x) {
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    return img[y * w + x];
  };
  const double cy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
  const double cx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
  const int y0 = static_cast<int>(std::floor(cy));
  const int x0 = static_cast<int>(std::floor(cx));
  const double fy = cy - y0;
  const double fx = cx - x0;
  return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
         fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
}

struct ConvCase {
  Shape x;
  std::size_t out;
  std::size_t kernel;
  bool bias;
};

class ConvKernels : public ::testing::TestWithParam<ConvCase> {};

TEST_P(ConvKernels, ParallelMatchesReference) {
  const ConvCase c = GetParam();
  const auto x = random_tensor<double>(c.x, 1);
  const auto w = random_tensor<double>(Shape{c.out, c.x.c, c.kernel, c.kernel}, 2);
  const auto b = random_tensor<double>(Shape{1, 1, 1, c.out}, 3);
  const int pad = static_cast<int>(c.kernel - 1) / 2;
  const Shape ys{c.x.n, c.out, c.x.h, c.x.w};
  Tensor<double> y1(ys), y2(ys);
  k::conv2d_forward(x, w, c.bias ? b.data() : nullptr, pad, y1);
  ref::conv2d_forward(x, w, c.bias ? b.data() : nullptr, pad, y2);
  EXPECT_LT(max_abs_diff(y1, y2), 1e-12);

  const auto dy = random_tensor<double>(ys, 4);
  Tensor<double> dx1(c.x), dx2(c.x), dw1(w.shape()), dw2(w.shape());
  std::vector<double> db1(c.out), db2(c.out);
  k::conv2d_backward(x, w, dy, pad, &dx1, &dw1, db1.data());
  ref::conv2d_backward(x, w, dy, pad, &dx2, &dw2, db2.data());
  EXPECT_LT(max_abs_diff(dx1, dx2), 1e-12);
  EXPECT_LT(max_abs_diff(dw1, dw2), 1e-11);
  for (std::size_t i = 0; i < c.out; ++i) EXPECT_NEAR(db1[i], db2[i], 1e-11);
}

INSTANTIATE_TEST_SUITE_P(
    Shapes, ConvKernels,
    ::testing::Values(ConvCase{{1, 3, 8, 8}, 4, 3, false},
                      ConvCase{{2, 5, 7, 9}, 3, 3, true},
                      ConvCase{{3, 4, 6, 5}, 6, 1, true},
                      ConvCase{{1, 1, 1, 1}, 2, 3, false},
                      ConvCase{{2, 16, 16, 16}, 8, 3, false}));

TEST(ConvKernels, BackwardAccumulatesAndSkipsNullOutputs) {
  const auto x = random_tensor<double>(Shape{1, 2, 5, 5}, 5);
  const auto w = random_tensor<double>(Shape{3, 2, 3, 3}, 6);
  const auto dy = random_tensor<double>(Shape{1, 3, 5, 5}, 7);
  Tensor<double> once(x.shape()), twice(x.shape());
  k::conv2d_backward<double>(x, w, dy, 1, &once, nullptr, nullptr);
  k::conv2d_backward<double>(x, w, dy, 1, &twice, nullptr, nullptr);
  k::conv2d_backward<double>(x, w, dy, 1, &twice, nullptr, nullptr);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(twice[i], 2 * once[i], 1e-12);
}

TEST(ConvKernels, SingleTapIdentity) {
  const auto x = random_tensor<float>(Shape{1, 1, 4, 4}, 8);
  Tensor<float> w(Shape{1, 1, 3, 3});
  w.at(0, 0, 1, 1) = 1.0f;
  Tensor<float> y(x.shape());
  k::conv2d_forward<float>(x, w, nullptr, 1, y);
  EXPECT_EQ(y, x);
}

TEST(BatchNormKernels, TrainForwardMatchesReferenceAndDefinition) {
  const Shape s{3, 4, 5, 6};
  const auto x = random_tensor<double>(s, 9, -2, 3);
  const auto g = random_tensor<double>(Shape{1, 1, 1, 4}, 10);
  const auto b = random_tensor<double>(Shape{1, 1, 1, 4}, 11);
  Tensor<double> y1(s), y2(s);
  std::vector<double> m1, i1, v1, m2, i2, v2;
  k::batchnorm_forward_train(x, g.data(), b.data(), 1e-5, y1, m1, i1, v1);
  ref::batchnorm_forward_train(x, g.data(), b.data(), 1e-5, y2, m2, i2, v2);
  EXPECT_LT(max_abs_diff(y1, y2), 1e-12);
  for (std::size_t c = 0; c < 4; ++c) {
    double sum = 0, sq = 0;
    const double count = 3.0 * 30.0;
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t p = 0; p < 30; ++p) sum += x.plane(n, c)[p];
    const double mean = sum / count;
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t p = 0; p < 30; ++p) sq += std::pow(x.plane(n, c)[p] - mean, 2);
    EXPECT_NEAR(m1[c], mean, 1e-12);
    EXPECT_NEAR(v1[c], sq / count, 1e-12);
    EXPECT_NEAR(i1[c], 1.0 / std::sqrt(sq / count + 1e-5), 1e-10);
    // Normalised output has the shift as its mean.
    double ym = 0;
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t p = 0; p < 30; ++p) ym += y1.plane(n, c)[p];
    EXPECT_NEAR(ym / count, b[c], 1e-10);
  }
}

TEST(BatchNormKernels, EvalAndBackwardMatchReference) {
  const Shape s{2, 3, 4, 4};
  const auto x = random_tensor<double>(s, 12);
  const auto g = random_tensor<double>(Shape{1, 1, 1, 3}, 13);
  const auto b = random_tensor<double>(Shape{1, 1, 1, 3}, 14);
  const auto rm = random_tensor<double>(Shape{1, 1, 1, 3}, 15);
  const auto rv = random_tensor<double>(Shape{1, 1, 1, 3}, 16, 0.5, 2.0);
  Tensor<double> y1(s), y2(s);
  k::batchnorm_forward_eval(x, g.data(), b.data(), rm.data(), rv.data(), 1e-5, y1);
  ref::batchnorm_forward_eval(x, g.data(), b.data(), rm.data(), rv.data(), 1e-5, y2);
  EXPECT_LT(max_abs_diff(y1, y2), 1e-12);

  std::vector<double> mean, invstd, var;
  Tensor<double> yt(s);
  k::batchnorm_forward_train(x, g.data(), b.data(), 1e-5, yt, mean, invstd, var);
  const auto dy = random_tensor<double>(s, 17);
  for (bool batch_stats : {true, false}) {
    Tensor<double> dx1(s), dx2(s);
    std::vector<double> dg1(3), db1(3), dg2(3), db2(3);
    k::batchnorm_backward(x, g.data(), mean, invstd, batch_stats, dy, &dx1, dg1.data(), db1.data());
    ref::batchnorm_backward(x, g.data(), mean, invstd, batch_stats, dy, &dx2, dg2.data(), db2.data());
    EXPECT_LT(max_abs_diff(dx1, dx2), 1e-12);
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_NEAR(dg1[c], dg2[c], 1e-12);
      EXPECT_NEAR(db1[c], db2[c], 1e-12);
    }
  }
}

TEST(ElementwiseKernels, ReluAndMaxpoolMatchReference) {
  const Shape s{2, 3, 6, 8};
  const auto x = random_tensor<float>(s, 18);
  Tensor<float> r1(s), r2(s);
  k::relu_forward(x, r1);
  ref::relu_forward(x, r2);
  EXPECT_EQ(r1, r2);
  const auto dy = random_tensor<float>(s, 19);
  Tensor<float> d1(s), d2(s);
  k::relu_backward(x, dy, d1);
  ref::relu_backward(x, dy, d2);
  EXPECT_EQ(d1, d2);

  const Shape ps{2, 3, 3, 4};
  Tensor<float> p1(ps), p2(ps);
  std::vector<std::uint32_t> a1, a2;
  k::maxpool2_forward(x, p1, a1);
  ref::maxpool2_forward(x, p2, a2);
  EXPECT_EQ(p1, p2);
  EXPECT_EQ(a1, a2);
  const auto pdy = random_tensor<float>(ps, 20);
  Tensor<float> g1(s), g2(s);
  k::maxpool2_backward(a1, pdy, g1);
  ref::maxpool2_backward(a2, pdy, g2);
  EXPECT_EQ(g1, g2);
}

TEST(ElementwiseKernels, ReluPropagatesNan) {
  Tensor<float> x(Shape{1, 1, 1, 3});
  x[0] = std::nanf("");
  x[1] = -2.0f;
  x[2] = 3.0f;
  Tensor<float> y, yr;
  k::relu_forward(x, y);
  ref::relu_forward(x, yr);
  EXPECT_TRUE(std::isnan(y[0]));
  EXPECT_TRUE(std::isnan(yr[0]));
  EXPECT_EQ(y[1], 0.0f);
  EXPECT_EQ(y[2], 3.0f);
}

TEST(ElementwiseKernels, MaxpoolTiesGoToFirstInWindow) {
  Tensor<double> x(Shape{1, 1, 2, 2}, 3.0);
  Tensor<double> y(Shape{1, 1, 1, 1});
  std::vector<std::uint32_t> arg;
  k::maxpool2_forward(x, y, arg);
  EXPECT_EQ(y[0], 3.0);
  Tensor<double> dy(Shape{1, 1, 1, 1}, 1.0);
  Tensor<double> dx(x.shape());
  k::maxpool2_backward(arg, dy, dx);
  EXPECT_EQ(dx[0], 1.0);
  EXPECT_EQ(dx[1] + dx[2] + dx[3], 0.0);
}

TEST(BilinearKernels, RampDownsampleMatchesScalarOracle) {
  Tensor<double> x(Shape{1, 1, 4, 4});
  std::vector<double> img(16);
  for (int i = 0; i < 16; ++i) x[i] = img[i] = i;
  Tensor<double> y(Shape{1, 1, 2, 2});
  k::bilinear_forward(x, y);
  for (int oy = 0; oy < 2; ++oy) {
    for (int ox = 0; ox < 2; ++ox) {
      EXPECT_NEAR(y.at(0, 0, oy, ox), bilinear_oracle(img, 4, 4, 2, 2, oy, ox), 1e-14);
    }
  }
  // Half-pixel centres: each output is the mean of its 2x2 block.
  EXPECT_NEAR(y[0], 2.5, 1e-14);
  EXPECT_NEAR(y[3], 12.5, 1e-14);
}

TEST(BilinearKernels, RandomResizesMatchOracleAndReference) {
  const std::vector<std::pair<Extent, Extent>> cases{
      {{4, 4}, {8, 8}}, {{8, 8}, {4, 4}}, {{5, 7}, {9, 3}}, {{3, 3}, {3, 3}},
      {{1, 1}, {4, 5}}, {{6, 4}, {12, 8}}};
  std::uint64_t seed = 30;
  for (const auto& [in, out] : cases) {
    const auto x = random_tensor<double>(Shape{2, 2, in.height, in.width}, seed++);
    Tensor<double> y1(Shape{2, 2, out.height, out.width}), y2(y1.shape());
    k::bilinear_forward(x, y1);
    ref::bilinear_forward(x, y2);
    EXPECT_LT(max_abs_diff(y1, y2), 1e-14);
    std::vector<double> img(x.plane(1, 1), x.plane(1, 1) + in.height * in.width);
    for (std::size_t oy = 0; oy < out.height; ++oy) {
      for (std::size_t ox = 0; ox < out.width; ++ox) {
        EXPECT_NEAR(y1.at(1, 1, oy, ox),
                    bilinear_oracle(img, in.height, in.width, out.height,
                                    out.width, oy, ox),
                    1e-13);
      }
    }
  }
}

TEST(BilinearKernels, BackwardIsTheAdjoint) {
  const std::vector<std::pair<Extent, Extent>> cases{
      {{4, 4}, {8, 8}}, {{8, 8}, {4, 4}}, {{5, 7}, {9, 3}}};
  std::uint64_t seed = 40;
  for (const auto& [in, out] : cases) {
    const auto x = random_tensor<double>(Shape{1, 3, in.height, in.width}, seed++);
    const auto dy = random_tensor<double>(Shape{1, 3, out.height, out.width}, seed++);
    Tensor<double> y(dy.shape()), dx(x.shape()), dx_ref(x.shape());
    k::bilinear_forward(x, y);
    k::bilinear_backward(dy, dx);
    ref::bilinear_backward(dy, dx_ref);
    EXPECT_LT(max_abs_diff(dx, dx_ref), 1e-13);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += y[i] * dy[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * dx[i];
    EXPECT_NEAR(lhs, rhs, 1e-11);
  }
}

TEST(BilinearKernels, ConstantIsPreserved) {
  Tensor<float> x(Shape{1, 1, 2, 2}, 1.0f);
  Tensor<float> y(Shape{1, 1, 4, 4});
  k::bilinear_forward(x, y);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_FLOAT_EQ(y[i], 1.0f);
}

TEST(ParallelKernels, BitIdenticalAcrossThreadCounts) {
  const auto x = random_tensor<float>(Shape{2, 8, 12, 12}, 50);
  const auto w = random_tensor<float>(Shape{6, 8, 3, 3}, 51);
  const auto g = random_tensor<float>(Shape{1, 1, 1, 6}, 52);
  const auto b = random_tensor<float>(Shape{1, 1, 1, 6}, 53);
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    Tensor<float> y(Shape{2, 6, 12, 12}), z(y.shape());
    k::conv2d_forward<float>(x, w, nullptr, 1, y);
    std::vector<float> m, i, v;
    k::batchnorm_forward_train(y, g.data(), b.data(), 1e-5f, z, m, i, v);
    Tensor<float> dx(x.shape()), dw(w.shape());
    k::conv2d_backward<float>(x, w, z, 1, &dx, &dw, nullptr);
    Tensor<float> up(Shape{2, 8, 24, 24});
    k::bilinear_forward(x, up);
    return std::vector<Tensor<float>>{z, dx, dw, up};
  };
  const int saved = omp_get_max_threads();
  const auto a = run(1);
  const auto c = run(4);
  omp_set_num_threads(saved);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], c[i]) << i;
}

}  // namespace
}  // namespace pmrnet
