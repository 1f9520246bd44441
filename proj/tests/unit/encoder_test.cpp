#include <gtest/gtest.h>

#include "pmrnet/encoder.hpp"
#include "test_support.hpp"

namespace pmrnet {
namespace {

using testing::probe;
using testing::random_tensor;

NetworkConfig net(int layers, int branches, int base, int in_channels = 3) {
  NetworkConfig c;
  c.num_layers = layers;
  c.num_branches = branches;
  c.base_channels = base;
  c.in_channels = in_channels;
  return c;
}

template <typename T>
struct Harness {
  ParameterSet<T> params;
  std::mt19937_64 rng{3};
  NetworkConfig cfg;
  PmrEncoder<T> encoder;
  explicit Harness(NetworkConfig c)
      : cfg(c), encoder(BuildContext<T>{&params, &rng, "encoder"}, c, c.num_branches) {}
};

TEST(BranchInputs, Sizes) {
  auto x = make_leaf(Tensor<float>(Shape{1, 3, 512, 512}));
  const auto in = make_branch_inputs(x, 3);
  ASSERT_EQ(in.size(), 3u);
  EXPECT_EQ(in[0]->shape().extent(), (Extent{512, 512}));
  EXPECT_EQ(in[1]->shape().extent(), (Extent{256, 256}));
  EXPECT_EQ(in[2]->shape().extent(), (Extent{128, 128}));
  EXPECT_EQ(in[0], x);
}

TEST(BranchInputs, SingleBranchIsUnchanged) {
  auto x = make_leaf(random_tensor<float>({2, 1, 12, 20}, 1));
  const auto in = make_branch_inputs(x, 1);
  ASSERT_EQ(in.size(), 1u);
  EXPECT_EQ(in[0]->value, x->value);
}

TEST(BranchInputs, ConstantStaysConstant) {
  auto white = make_leaf(Tensor<double>(Shape{1, 3, 16, 16}, 1.0));
  for (const auto& b : make_branch_inputs(white, 2)) {
    for (std::size_t i = 0; i < b->value.size(); ++i) EXPECT_DOUBLE_EQ(b->value[i], 1.0);
  }
}

TEST(BranchInputs, Divisibility) {
  auto x = make_leaf(Tensor<float>(Shape{1, 3, 12, 12}));
  EXPECT_NO_THROW(make_branch_inputs(x, 3));
  EXPECT_THROW(make_branch_inputs(x, 4), DivisibilityError);
  EXPECT_THROW(make_branch_inputs(x, 0), RangeError);
}

TEST(Encoder, PyramidShapesHandCalculus) {
  Harness<float> h(net(3, 2, 8));
  auto x = make_leaf(random_tensor<float>({1, 3, 32, 32}, 2));
  const auto p = h.encoder.forward(make_branch_inputs(x, 2), true);
  const std::map<Role, Shape> expected{
      {{1, 0}, {1, 8, 32, 32}}, {{1, 1}, {1, 8, 16, 16}},
      {{2, 0}, {1, 16, 16, 16}}, {{2, 1}, {1, 16, 8, 8}},
      {{3, 0}, {1, 32, 8, 8}}, {{3, 1}, {1, 32, 4, 4}}};
  ASSERT_EQ(p.size(), expected.size());
  for (const auto& [role, shape] : expected) {
    EXPECT_EQ(p.at(role).shape(), shape) << role.to_string();
    EXPECT_EQ(p.at(role).role, role);
  }
}

TEST(Encoder, SingleBranchDegenerateCase) {
  Harness<float> h(net(2, 1, 4, 1));
  auto x = make_leaf(random_tensor<float>({1, 1, 8, 8}, 3));
  const auto p = h.encoder.forward(make_branch_inputs(x, 1), true);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p.at({1, 0}).shape(), (Shape{1, 4, 8, 8}));
  EXPECT_EQ(p.at({2, 0}).shape(), (Shape{1, 8, 4, 4}));
}

TEST(Encoder, StoresLTimesBMapsMatchingValidateConfig) {
  for (int layers : {2, 3, 4}) {
    for (int branches : {1, 2, 3}) {
      Harness<float> h(net(layers, branches, 2));
      const std::size_t hw = required_divisor(h.cfg) * 2;
      auto x = make_leaf(random_tensor<float>({1, 3, hw, hw}, 4));
      const auto p = h.encoder.forward(make_branch_inputs(x, branches), true);
      EXPECT_EQ(p.size(), static_cast<std::size_t>(layers * branches));
      const auto v = validate_config(h.cfg, Extent{hw, hw});
      for (const auto& [role, slot] : v.slots) {
        EXPECT_EQ(p.at(role).shape().extent(), slot.extent);
        EXPECT_EQ(static_cast<int>(p.at(role).shape().c), slot.channels);
      }
    }
  }
}

TEST(Encoder, SingleBranchRunsNoResizeOrConcat) {
  Harness<double> h(net(4, 1, 2));
  auto x = make_leaf(random_tensor<double>({1, 3, 16, 16}, 5), true);
  const auto p = h.encoder.forward(make_branch_inputs(x, 1), true);
  const auto ops = count_ops(p.at({4, 0}).var);
  EXPECT_EQ(ops.count("resize"), 0u);
  EXPECT_EQ(ops.count("concat"), 0u);
  EXPECT_EQ(ops.at("conv2d"), 8u);
  EXPECT_EQ(ops.at("max_pool2"), 3u);
}

TEST(Encoder, MultiBranchFusesOncePerFinerBranchAndLayer) {
  Harness<double> h(net(3, 3, 2));
  auto x = make_leaf(random_tensor<double>({1, 3, 16, 16}, 6), true);
  const auto p = h.encoder.forward(make_branch_inputs(x, 3), true);
  const auto ops = count_ops(p.at({3, 0}).var);
  // Ancestors of f_3(x_0): fusions for f_2(x_0), f_2(x_1) and f_3(x_0), plus
  // the two input downsamples. f_2(x_2) only feeds f_3(x_1).
  EXPECT_EQ(ops.at("concat"), 3u);
  EXPECT_EQ(ops.at("resize"), 3u + 2u);
}

TEST(Encoder, EveryBranchInputInfluencesTheDeepestMap) {
  Harness<double> h(net(3, 3, 2));
  auto x = make_leaf(random_tensor<double>({1, 3, 16, 16}, 7));
  std::vector<Var<double>> inputs;
  {
    NoGradGuard g;
    for (const auto& b : make_branch_inputs(x, 3)) inputs.push_back(make_leaf(b->value, true));
  }
  auto deepest = h.encoder.forward(inputs, true).at({3, 0}).var;
  const auto r = random_tensor<double>(deepest->shape(), 8);
  backward(probe(deepest, r));
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    double norm = 0;
    for (std::size_t i = 0; i < inputs[j]->grad.size(); ++i) norm += std::abs(inputs[j]->grad[i]);
    EXPECT_GT(norm, 0.0) << "branch " << j;
  }
  // Finite-difference sensitivity of the coarsest input agrees in sign and
  // size with the analytic one on its largest entry.
  auto& g2 = inputs[2]->grad;
  std::size_t arg = 0;
  for (std::size_t i = 1; i < g2.size(); ++i)
    if (std::abs(g2[i]) > std::abs(g2[arg])) arg = i;
  auto loss_at = [&](double delta) {
    NoGradGuard g;
    const double saved = inputs[2]->value[arg];
    inputs[2]->value[arg] = saved + delta;
    const double v = probe(h.encoder.forward(inputs, true).at({3, 0}).var, r)->value[0];
    inputs[2]->value[arg] = saved;
    return v;
  };
  const double numeric = (loss_at(1e-6) - loss_at(-1e-6)) / 2e-6;
  EXPECT_NEAR(numeric, g2[arg], 1e-6 * std::max(1.0, std::abs(g2[arg])));
}

TEST(Encoder, PartialDeepestRowOnlyBuildsBranchZero) {
  ParameterSet<float> params;
  std::mt19937_64 rng(9);
  const NetworkConfig c = net(3, 2, 2);
  PmrEncoder<float> enc(BuildContext<float>{&params, &rng, "encoder"}, c, 2, false);
  auto x = make_leaf(random_tensor<float>({1, 3, 16, 16}, 10));
  const auto p = enc.forward(make_branch_inputs(x, 2), true);
  EXPECT_EQ(p.count({3, 0}), 1u);
  EXPECT_EQ(p.count({3, 1}), 0u);
  EXPECT_EQ(p.count({2, 1}), 1u);
  EXPECT_EQ(params.find("encoder.l3.b1.unit0.conv.weight"), nullptr);

  // With three branches f_2(x_2) would only feed f_3(x_1), so it goes too.
  ParameterSet<float> p3;
  PmrEncoder<float> e3(BuildContext<float>{&p3, &rng, "encoder"}, net(3, 3, 2), 3, false);
  const auto q = e3.forward(make_branch_inputs(x, 3), true);
  EXPECT_EQ(q.count({2, 2}), 0u);
  EXPECT_EQ(q.count({2, 1}), 1u);
  EXPECT_EQ(q.count({1, 2}), 1u);
  EXPECT_EQ(p3.find("encoder.l2.b2.unit0.conv.weight"), nullptr);
}

TEST(Encoder, RejectsWrongBranchCount) {
  Harness<float> h(net(3, 2, 2));
  auto x = make_leaf(random_tensor<float>({1, 3, 16, 16}, 11));
  EXPECT_THROW(h.encoder.forward(make_branch_inputs(x, 1), true), ShapeError);
}

}  // namespace
}  // namespace pmrnet
