#include "pmrnet/encoder.hpp"

#include <algorithm>

#include "pmrnet/errors.hpp"

namespace pmrnet {

template <typename T>
std::vector<Var<T>> make_branch_inputs(const Var<T>& x, int branches) {
  if (branches < 1) throw RangeError("make_branch_inputs: branches must be >= 1");
  const Shape s = x->shape();
  const std::size_t divisor = std::size_t{1} << (branches - 1);
  if (s.h % divisor != 0 || s.w % divisor != 0) {
    throw DivisibilityError("branch inputs: extent " + s.extent().to_string() +
                            " not divisible by " + std::to_string(divisor));
  }
  std::vector<Var<T>> out{x};
  for (int j = 1; j < branches; ++j) {
    const Extent prev = out.back()->shape().extent();
    out.push_back(ops::resize_bilinear(out.back(),
                                       Extent{prev.height / 2, prev.width / 2}));
  }
  return out;
}

template <typename T>
PmrEncoder<T>::PmrEncoder(const BuildContext<T>& ctx, const NetworkConfig& cfg,
                          int branches, bool deepest_all_branches)
    : layers_(cfg.num_layers), branches_(branches) {
  // Without the coarser deepest maps, f_i(x_j) only matters for j <= L - i.
  const int stems = deepest_all_branches ? branches_ : std::min(branches_, layers_);
  for (int j = 0; j < stems; ++j) {
    stems_.emplace_back(ctx.child("stem.b" + std::to_string(j)),
                        cfg.in_channels, channels_at(cfg, 1));
  }
  for (int i = 1; i < layers_; ++i) {
    std::vector<PrbcBlock<T>> row;
    const int c = channels_at(cfg, i);
    const int built = deepest_all_branches ? branches_ : std::min(branches_, layers_ - i);
    for (int j = 0; j < built; ++j) {
      const int in = (j == branches_ - 1) ? c : 2 * c;
      row.emplace_back(
          ctx.child("l" + std::to_string(i + 1) + ".b" + std::to_string(j)), in,
          channels_at(cfg, i + 1));
    }
    transitions_.push_back(std::move(row));
  }
}

template <typename T>
FeaturePyramid<T> PmrEncoder<T>::forward(std::span<const Var<T>> inputs,
                                         bool training) {
  if (inputs.size() != static_cast<std::size_t>(branches_)) {
    throw ShapeError("encoder expects " + std::to_string(branches_) +
                     " branch inputs, got " + std::to_string(inputs.size()));
  }
  FeaturePyramid<T> pyramid;
  std::vector<Var<T>> current(branches_);
  for (int j = 0; j < static_cast<int>(stems_.size()); ++j) {
    current[j] = stems_[j].forward(inputs[j], training);
    pyramid[{1, j}] = {current[j], {1, j}};
  }
  for (int i = 1; i < layers_; ++i) {
    std::vector<Var<T>> next(branches_);
    // Coarsest branch first; finer branches read the same-layer coarser map.
    const int built = static_cast<int>(transitions_[i - 1].size());
    for (int j = built - 1; j >= 0; --j) {
      Var<T> in = current[j];
      if (j < branches_ - 1) {
        in = fuse_concat<T>({current[j], resize_bilinear(current[j + 1],
                                                         current[j]->shape().extent())});
      }
      next[j] = transitions_[i - 1][j].forward(in, training);
      pyramid[{i + 1, j}] = {next[j], {i + 1, j}};
    }
    current = std::move(next);
  }
  return pyramid;
}

template std::vector<Var<float>> make_branch_inputs<float>(const Var<float>&, int);
template std::vector<Var<double>> make_branch_inputs<double>(const Var<double>&, int);
template std::vector<Var<long double>> make_branch_inputs<long double>(const Var<long double>&, int);
template class PmrEncoder<float>;
template class PmrEncoder<double>;
template class PmrEncoder<long double>;

}  // namespace pmrnet
