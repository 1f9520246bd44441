#include "pmrnet/context.hpp"

#include <vector>

#include "pmrnet/errors.hpp"

namespace pmrnet {

namespace {

template <typename T>
void pool_down(ContextSet<T>& out, Var<T> top, int layer, int branches) {
  out[0] = {top, {layer, 0}};
  for (int j = 1; j < branches; ++j) {
    top = ops::max_pool2(top);
    out[j] = {top, {layer, j}};
  }
}

}  // namespace

template <typename T>
MrContext<T>::MrContext(const BuildContext<T>& ctx, const NetworkConfig& cfg,
                        int branches)
    : layers_(cfg.num_layers), branches_(branches),
      fuse_(ctx.child("fuse"), branches * channels_at(cfg, cfg.num_layers),
            channels_at(cfg, cfg.num_layers), cfg.context_convs) {}

template <typename T>
ContextSet<T> MrContext<T>::forward(std::span<const Var<T>> deepest,
                                    bool training) {
  if (deepest.size() != static_cast<std::size_t>(branches_)) {
    throw ShapeError("context expects " + std::to_string(branches_) +
                     " deepest maps, got " + std::to_string(deepest.size()));
  }
  const Extent top = deepest[0]->shape().extent();
  std::vector<Var<T>> parts;
  for (int j = branches_ - 1; j >= 1; --j) {
    parts.push_back(resize_bilinear(deepest[j], top));
  }
  parts.push_back(deepest[0]);
  ContextSet<T> out;
  pool_down(out, fuse_.forward(fuse_concat<T>(parts), training), layers_,
            branches_);
  return out;
}

template <typename T>
ContextSet<T> context_passthrough(std::span<const Var<T>> deepest, int layer) {
  ContextSet<T> out;
  for (std::size_t j = 0; j < deepest.size(); ++j) {
    out[static_cast<int>(j)] = {deepest[j], {layer, static_cast<int>(j)}};
  }
  return out;
}

template <typename T>
ContextSet<T> context_from_pooling(const Var<T>& deepest, int layer,
                                   int branches) {
  ContextSet<T> out;
  pool_down(out, deepest, layer, branches);
  return out;
}

template class MrContext<float>;
template class MrContext<double>;
template class MrContext<long double>;
template ContextSet<float> context_passthrough<float>(std::span<const Var<float>>, int);
template ContextSet<double> context_passthrough<double>(std::span<const Var<double>>, int);
template ContextSet<long double> context_passthrough<long double>(std::span<const Var<long double>>, int);
template ContextSet<float> context_from_pooling<float>(const Var<float>&, int, int);
template ContextSet<double> context_from_pooling<double>(const Var<double>&, int, int);
template ContextSet<long double> context_from_pooling<long double>(const Var<long double>&, int, int);

}  // namespace pmrnet
