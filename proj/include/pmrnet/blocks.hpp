#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "pmrnet/autograd.hpp"
#include "pmrnet/netconfig.hpp"
#include "pmrnet/ops.hpp"

// Composite blocks shared by the encoder, context module and decoder.
namespace pmrnet {

// A feature map tagged with its (layer, branch) position.
template <typename T>
struct FeatureMap {
  Var<T> var;
  Role role;

  const Shape& shape() const { return var->shape(); }
  const Tensor<T>& value() const { return var->value; }
};

// Named learnable parameters and non-learnable buffers of a model, in
// registration order.
template <typename T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Var<T> var;
    bool learnable = true;
  };

  Var<T> add_parameter(const std::string& name, Tensor<T> init);
  Var<T> add_buffer(const std::string& name, Tensor<T> init);

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry> parameters() const;
  // Exact count of learnable scalars.
  std::size_t parameter_count() const;
  void zero_grad();
  // nullptr when absent.
  Var<T> find(const std::string& name) const;

 private:
  Var<T> add(const std::string& name, Tensor<T> init, bool learnable);
  std::vector<Entry> entries_;
};

// Construction-time state: where parameters go, the RNG for initialization
// and the dotted name prefix.
template <typename T>
struct BuildContext {
  ParameterSet<T>* params;
  std::mt19937_64* rng;
  std::string prefix;

  BuildContext child(const std::string& name) const {
    return {params, rng, prefix.empty() ? name : prefix + "." + name};
  }
  std::string name(const std::string& leaf) const {
    return prefix.empty() ? leaf : prefix + "." + leaf;
  }
};

// Convolution with Kaiming-normal (fan-in) weights. Bias, when enabled,
// starts at zero.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const BuildContext<T>& ctx, int in_channels, int out_channels,
         int kernel, bool bias);

  Var<T> forward(const Var<T>& x) const;
  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }

 private:
  Var<T> weight_;
  Var<T> bias_;
  int in_channels_ = 0;
  int out_channels_ = 0;
  int pad_ = 0;
};

constexpr double kBatchNormMomentum = 0.1;
constexpr double kBatchNormEps = 1e-5;

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(const BuildContext<T>& ctx, int channels);

  Var<T> forward(const Var<T>& x, bool training);

 private:
  Var<T> gamma_;
  Var<T> beta_;
  ops::BatchNormStats<T> stats_;
};

// conv3x3 (no bias) -> batch norm -> ReLU, repeated `units` times. The first
// convolution maps in -> out channels, later ones out -> out.
template <typename T>
class CbrBlock {
 public:
  static constexpr int kDefaultUnits = 2;

  CbrBlock() = default;
  CbrBlock(const BuildContext<T>& ctx, int in_channels, int out_channels,
           int units = kDefaultUnits);

  Var<T> forward(const Var<T>& x, bool training);
  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }

 private:
  struct Unit {
    Conv2d<T> conv;
    BatchNorm2d<T> bn;
  };
  std::vector<Unit> units_;
  int in_channels_ = 0;
  int out_channels_ = 0;
};

// CbrBlock followed by 2x2 max pooling (PRBC). Halves the extent; odd
// extents raise OddSizeError.
template <typename T>
class PrbcBlock {
 public:
  PrbcBlock() = default;
  PrbcBlock(const BuildContext<T>& ctx, int in_channels, int out_channels);

  Var<T> forward(const Var<T>& x, bool training);

 private:
  CbrBlock<T> cbr_;
};

// CbrBlock followed by bilinear resize to a target extent (URBC). A target
// smaller than the input raises ShapeError.
template <typename T>
class UrbcBlock {
 public:
  UrbcBlock() = default;
  UrbcBlock(const BuildContext<T>& ctx, int in_channels, int out_channels);

  Var<T> forward(const Var<T>& x, Extent target, bool training);

 private:
  CbrBlock<T> cbr_;
};

template <typename T>
Var<T> resize_bilinear(const Var<T>& x, Extent target) {
  return ops::resize_bilinear(x, target);
}

// Channel concatenation in order.
template <typename T>
Var<T> fuse_concat(std::span<const Var<T>> maps) {
  return ops::concat<T>(maps);
}

template <typename T>
Var<T> fuse_concat(std::initializer_list<Var<T>> maps) {
  return ops::concat<T>(maps);
}

}  // namespace pmrnet
