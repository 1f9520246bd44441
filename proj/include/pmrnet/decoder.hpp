#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>

#include "pmrnet/blocks.hpp"
#include "pmrnet/context.hpp"

namespace pmrnet {

// Nested skip nodes S(i, k) over the branch-0 encoder features.
// S(i, 0) = f_i(x_0); S(i, k) fuses S(i, 0..k-1) with the upsampled S(i+1, k-1).
// outputs[i] = f*_i(x_0) = S(i, L - i) for i = 1..L-1.
template <typename T>
struct SkipPathway {
  std::map<std::pair<int, int>, Var<T>> nodes;
  std::map<int, FeatureMap<T>> outputs;
  // Nodes that ran a CBR block (excludes the S(i, 0) inputs).
  std::size_t computed_nodes = 0;
};

template <typename T>
class SkipNest {
 public:
  SkipNest(const BuildContext<T>& ctx, const NetworkConfig& cfg);

  // branch0[i - 1] = f_i(x_0), i = 1..L
  SkipPathway<T> forward(std::span<const Var<T>> branch0, bool training);

 private:
  int layers_;
  std::map<std::pair<int, int>, CbrBlock<T>> blocks_;
};

// Decoder features f'_i(x_j) keyed by (layer, branch).
template <typename T>
using DecoderMaps = std::map<Role, FeatureMap<T>>;

// Parallel multi-resolution decoder. For i = L-1 .. 1 each branch is fused at
// the coarse (i+1, j) extent and lifted by URBC to input / 2^(i-1+j); branch 0
// additionally takes f*_i(x_0) resized down to the fusion extent.
template <typename T>
class PmrDecoder {
 public:
  PmrDecoder(const BuildContext<T>& ctx, const NetworkConfig& cfg, int branches,
             bool use_skips);

  DecoderMaps<T> forward(const ContextSet<T>& context,
                         const SkipPathway<T>* skips, Extent input,
                         bool training);

  int branches() const { return branches_; }

 private:
  int layers_;
  int branches_;
  bool use_skips_;
  std::map<Role, UrbcBlock<T>> blocks_;
};

template <typename T>
struct SegmentationOutput {
  Tensor<T> probabilities;          // (N, 1, H, W) in [0, 1]
  Tensor<std::uint8_t> mask;        // probabilities >= threshold
};

// p >= threshold -> 1.
template <typename T>
Tensor<std::uint8_t> binarize(const Tensor<T>& probabilities, double threshold);

// 1x1 convolution to one channel followed by a sigmoid.
template <typename T>
class SegmentationHead {
 public:
  SegmentationHead() = default;
  SegmentationHead(const BuildContext<T>& ctx, int in_channels);

  Var<T> probabilities(const Var<T>& features) const;
  SegmentationOutput<T> forward(const Var<T>& features, double threshold) const;

 private:
  Conv2d<T> conv_;
};

}  // namespace pmrnet
