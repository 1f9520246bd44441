#include "pmrnet/decoder.hpp"

#include <vector>

#include "pmrnet/errors.hpp"

namespace pmrnet {

template <typename T>
SkipNest<T>::SkipNest(const BuildContext<T>& ctx, const NetworkConfig& cfg)
    : layers_(cfg.num_layers) {
  for (int k = 1; k < layers_; ++k) {
    for (int i = 1; i <= layers_ - k; ++i) {
      const int c = channels_at(cfg, i);
      blocks_.emplace(std::pair{i, k},
                      CbrBlock<T>(ctx.child("s" + std::to_string(i) + "_" +
                                            std::to_string(k)),
                                  k * c + channels_at(cfg, i + 1), c));
    }
  }
}

template <typename T>
SkipPathway<T> SkipNest<T>::forward(std::span<const Var<T>> branch0,
                                    bool training) {
  if (branch0.size() != static_cast<std::size_t>(layers_)) {
    throw ShapeError("skip pathway expects " + std::to_string(layers_) +
                     " encoder maps, got " + std::to_string(branch0.size()));
  }
  SkipPathway<T> out;
  for (int i = 1; i <= layers_; ++i) out.nodes[{i, 0}] = branch0[i - 1];
  for (int k = 1; k < layers_; ++k) {
    for (int i = 1; i <= layers_ - k; ++i) {
      std::vector<Var<T>> parts;
      for (int m = 0; m < k; ++m) parts.push_back(out.nodes.at({i, m}));
      const Extent here = out.nodes.at({i, 0})->shape().extent();
      parts.push_back(resize_bilinear(out.nodes.at({i + 1, k - 1}), here));
      out.nodes[{i, k}] = blocks_.at({i, k}).forward(fuse_concat<T>(parts), training);
      ++out.computed_nodes;
    }
  }
  for (int i = 1; i < layers_; ++i) {
    out.outputs[i] = {out.nodes.at({i, layers_ - i}), {i, 0}};
  }
  return out;
}

template <typename T>
PmrDecoder<T>::PmrDecoder(const BuildContext<T>& ctx, const NetworkConfig& cfg,
                          int branches, bool use_skips)
    : layers_(cfg.num_layers), branches_(branches), use_skips_(use_skips) {
  for (int i = layers_ - 1; i >= 1; --i) {
    const int coarse = channels_at(cfg, i + 1);
    for (int j = branches_ - 1; j >= 0; --j) {
      int in = (j == branches_ - 1) ? coarse : 2 * coarse;
      if (j == 0 && use_skips_) in += channels_at(cfg, i);
      blocks_.emplace(Role{i, j},
                      UrbcBlock<T>(ctx.child("l" + std::to_string(i) + ".b" +
                                             std::to_string(j)),
                                   in, channels_at(cfg, i)));
    }
  }
}

template <typename T>
DecoderMaps<T> PmrDecoder<T>::forward(const ContextSet<T>& context,
                                      const SkipPathway<T>* skips,
                                      Extent input, bool training) {
  if (context.size() != static_cast<std::size_t>(branches_)) {
    throw ShapeError("decoder expects " + std::to_string(branches_) +
                     " context maps, got " + std::to_string(context.size()));
  }
  if (use_skips_ && !skips) throw ShapeError("decoder built with skips needs a skip pathway");
  std::vector<Var<T>> previous(branches_);
  for (int j = 0; j < branches_; ++j) previous[j] = context.at(j).var;
  DecoderMaps<T> out;
  for (int i = layers_ - 1; i >= 1; --i) {
    std::vector<Var<T>> current(branches_);
    for (int j = branches_ - 1; j >= 0; --j) {
      const Extent fusion = previous[j]->shape().extent();
      std::vector<Var<T>> parts{previous[j]};
      if (j < branches_ - 1) parts.push_back(resize_bilinear(previous[j + 1], fusion));
      if (j == 0 && use_skips_) {
        parts.push_back(resize_bilinear(skips->outputs.at(i).var, fusion));
      }
      const std::size_t f = std::size_t{1} << (i - 1 + j);
      const Extent target{input.height / f, input.width / f};
      current[j] = blocks_.at({i, j}).forward(fuse_concat<T>(parts), target, training);
      out[{i, j}] = {current[j], {i, j}};
    }
    previous = std::move(current);
  }
  return out;
}

template <typename T>
Tensor<std::uint8_t> binarize(const Tensor<T>& probabilities, double threshold) {
  Tensor<std::uint8_t> mask(probabilities.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = static_cast<double>(probabilities[i]) >= threshold ? 1 : 0;
  }
  return mask;
}

template <typename T>
SegmentationHead<T>::SegmentationHead(const BuildContext<T>& ctx,
                                      int in_channels)
    : conv_(ctx.child("conv"), in_channels, 1, 1, true) {}

template <typename T>
Var<T> SegmentationHead<T>::probabilities(const Var<T>& features) const {
  return ops::sigmoid(conv_.forward(features));
}

template <typename T>
SegmentationOutput<T> SegmentationHead<T>::forward(const Var<T>& features,
                                                   double threshold) const {
  SegmentationOutput<T> out;
  out.probabilities = probabilities(features)->value;
  out.mask = binarize(out.probabilities, threshold);
  return out;
}

template class SkipNest<float>;
template class SkipNest<double>;
template class SkipNest<long double>;
template class PmrDecoder<float>;
template class PmrDecoder<double>;
template class PmrDecoder<long double>;
template class SegmentationHead<float>;
template class SegmentationHead<double>;
template class SegmentationHead<long double>;
template Tensor<std::uint8_t> binarize<float>(const Tensor<float>&, double);
template Tensor<std::uint8_t> binarize<double>(const Tensor<double>&, double);
template Tensor<std::uint8_t> binarize<long double>(const Tensor<long double>&, double);

}  // namespace pmrnet
