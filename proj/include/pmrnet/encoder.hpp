#pragma once

#include <map>
#include <span>
#include <vector>

#include "pmrnet/blocks.hpp"

namespace pmrnet {

// Encoder features f_i(x_j) keyed by (layer, branch).
template <typename T>
using FeaturePyramid = std::map<Role, FeatureMap<T>>;

// [x_0, ..., x_{B-1}] where x_0 is the input itself and x_j halves x_{j-1}
// bilinearly. Throws DivisibilityError when the extent is not a multiple of
// 2^(B-1).
template <typename T>
std::vector<Var<T>> make_branch_inputs(const Var<T>& x, int branches);

// Parallel multi-resolution encoder. Layer 1 is a pool-free CBR stem per
// branch; each later layer pools, and every branch except the coarsest first
// fuses the adjacent coarser branch upsampled to its own extent.
template <typename T>
class PmrEncoder {
 public:
  // With deepest_all_branches false, f_L(x_j) is only built for j = 0 (the
  // coarser deepest maps have no consumer when the decoder reads branch 0
  // alone), and so f_i(x_j) only for j <= L - i.
  PmrEncoder(const BuildContext<T>& ctx, const NetworkConfig& cfg,
             int branches, bool deepest_all_branches = true);

  // `inputs` must come from make_branch_inputs with the same branch count.
  FeaturePyramid<T> forward(std::span<const Var<T>> inputs, bool training);

  int branches() const { return branches_; }
  int layers() const { return layers_; }

 private:
  int layers_;
  int branches_;
  std::vector<CbrBlock<T>> stems_;
  // transitions_[i - 1][j] produces f_{i+1}(x_j)
  std::vector<std::vector<PrbcBlock<T>>> transitions_;
};

}  // namespace pmrnet
