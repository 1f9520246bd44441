#pragma once

#include <map>
#include <span>

#include "pmrnet/blocks.hpp"

namespace pmrnet {

// Context features f'_L(x_j) keyed by branch.
template <typename T>
using ContextSet = std::map<int, FeatureMap<T>>;

// Multi-resolution context encoder: all deepest encoder maps are resized to
// the branch-0 extent, concatenated coarsest first with f_L(x_0) last, fused
// by one CBR block, then max-pooled repeatedly to re-emit one map per branch.
template <typename T>
class MrContext {
 public:
  MrContext(const BuildContext<T>& ctx, const NetworkConfig& cfg, int branches);

  // deepest[j] = f_L(x_j)
  ContextSet<T> forward(std::span<const Var<T>> deepest, bool training);

 private:
  int layers_;
  int branches_;
  CbrBlock<T> fuse_;
};

// f'_L(x_j) = f_L(x_j): the wiring used when the context module is removed.
template <typename T>
ContextSet<T> context_passthrough(std::span<const Var<T>> deepest, int layer);

// f'_L(x_0) = f_L(x_0) and f'_L(x_j) = maxpool^j(f_L(x_0)); lets a
// single-branch encoder feed a multi-branch decoder.
template <typename T>
ContextSet<T> context_from_pooling(const Var<T>& deepest, int layer,
                                   int branches);

}  // namespace pmrnet
