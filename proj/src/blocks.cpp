#include "pmrnet/blocks.hpp"

#include <cmath>

#include "pmrnet/errors.hpp"

namespace pmrnet {

template <typename T>
Var<T> ParameterSet<T>::add(const std::string& name, Tensor<T> init,
                            bool learnable) {
  if (find(name)) throw Error("duplicate parameter name " + name);
  Var<T> var = make_leaf(std::move(init), learnable);
  entries_.push_back({name, var, learnable});
  return var;
}

template <typename T>
Var<T> ParameterSet<T>::add_parameter(const std::string& name, Tensor<T> init) {
  return add(name, std::move(init), true);
}

template <typename T>
Var<T> ParameterSet<T>::add_buffer(const std::string& name, Tensor<T> init) {
  return add(name, std::move(init), false);
}

template <typename T>
std::vector<typename ParameterSet<T>::Entry> ParameterSet<T>::parameters()
    const {
  std::vector<Entry> out;
  for (const auto& e : entries_)
    if (e.learnable) out.push_back(e);
  return out;
}

template <typename T>
std::size_t ParameterSet<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& e : entries_)
    if (e.learnable) total += e.var->value.size();
  return total;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& e : entries_)
    if (e.learnable && !e.var->grad.empty()) e.var->grad.fill(T(0));
}

template <typename T>
Var<T> ParameterSet<T>::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.var;
  return nullptr;
}

template <typename T>
Conv2d<T>::Conv2d(const BuildContext<T>& ctx, int in_channels,
                  int out_channels, int kernel, bool bias)
    : in_channels_(in_channels), out_channels_(out_channels),
      pad_((kernel - 1) / 2) {
  const auto in = static_cast<std::size_t>(in_channels);
  const auto out = static_cast<std::size_t>(out_channels);
  const auto k = static_cast<std::size_t>(kernel);
  Tensor<T> w(Shape{out, in, k, k});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * k * k));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(dist(*ctx.rng));
  weight_ = ctx.params->add_parameter(ctx.name("weight"), std::move(w));
  if (bias) {
    Tensor<T> b(Shape{1, 1, 1, out});
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<T>(dist(*ctx.rng));
    bias_ = ctx.params->add_parameter(ctx.name("bias"), std::move(b));
  }
}

template <typename T>
Var<T> Conv2d<T>::forward(const Var<T>& x) const {
  return ops::conv2d(x, weight_, bias_, pad_);
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(const BuildContext<T>& ctx, int channels) {
  const Shape s{1, 1, 1, static_cast<std::size_t>(channels)};
  gamma_ = ctx.params->add_parameter(ctx.name("gamma"), Tensor<T>(s, T(1)));
  beta_ = ctx.params->add_parameter(ctx.name("beta"), Tensor<T>(s, T(0)));
  stats_.running_mean = ctx.params->add_buffer(ctx.name("running_mean"), Tensor<T>(s, T(0)));
  stats_.running_var = ctx.params->add_buffer(ctx.name("running_var"), Tensor<T>(s, T(1)));
}

template <typename T>
Var<T> BatchNorm2d<T>::forward(const Var<T>& x, bool training) {
  return ops::batch_norm(x, gamma_, beta_, stats_, training,
                         static_cast<T>(kBatchNormMomentum),
                         static_cast<T>(kBatchNormEps));
}

template <typename T>
CbrBlock<T>::CbrBlock(const BuildContext<T>& ctx, int in_channels,
                      int out_channels, int units)
    : in_channels_(in_channels), out_channels_(out_channels) {
  if (units < 1) throw RangeError("CbrBlock needs at least one unit");
  for (int u = 0; u < units; ++u) {
    const BuildContext<T> uc = ctx.child("unit" + std::to_string(u));
    Unit unit;
    unit.conv = Conv2d<T>(uc.child("conv"), u == 0 ? in_channels : out_channels,
                          out_channels, 3, false);
    unit.bn = BatchNorm2d<T>(uc.child("bn"), out_channels);
    units_.push_back(std::move(unit));
  }
}

template <typename T>
Var<T> CbrBlock<T>::forward(const Var<T>& x, bool training) {
  if (x->shape().c != static_cast<std::size_t>(in_channels_)) {
    throw ShapeError("cbr block expects " + std::to_string(in_channels_) +
                     " channels, got " + x->shape().to_string());
  }
  Var<T> h = x;
  for (auto& unit : units_) {
    h = ops::relu(unit.bn.forward(unit.conv.forward(h), training));
  }
  return h;
}

template <typename T>
PrbcBlock<T>::PrbcBlock(const BuildContext<T>& ctx, int in_channels,
                        int out_channels)
    : cbr_(ctx, in_channels, out_channels) {}

template <typename T>
Var<T> PrbcBlock<T>::forward(const Var<T>& x, bool training) {
  const Shape s = x->shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw OddSizeError("prbc block: odd extent " + s.extent().to_string());
  }
  return ops::max_pool2(cbr_.forward(x, training));
}

template <typename T>
UrbcBlock<T>::UrbcBlock(const BuildContext<T>& ctx, int in_channels,
                        int out_channels)
    : cbr_(ctx, in_channels, out_channels) {}

template <typename T>
Var<T> UrbcBlock<T>::forward(const Var<T>& x, Extent target, bool training) {
  const Shape s = x->shape();
  if (target.height < s.h || target.width < s.w) {
    throw ShapeError("urbc block: target " + target.to_string() +
                     " smaller than input " + s.extent().to_string());
  }
  return ops::resize_bilinear(cbr_.forward(x, training), target);
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class ParameterSet<long double>;
template class Conv2d<float>;
template class Conv2d<double>;
template class Conv2d<long double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class BatchNorm2d<long double>;
template class CbrBlock<float>;
template class CbrBlock<double>;
template class CbrBlock<long double>;
template class PrbcBlock<float>;
template class PrbcBlock<double>;
template class PrbcBlock<long double>;
template class UrbcBlock<float>;
template class UrbcBlock<double>;
template class UrbcBlock<long double>;

}  // namespace pmrnet
