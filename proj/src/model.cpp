#include "pmrnet/model.hpp"

#include "pmrnet/errors.hpp"

namespace pmrnet {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::pmr_encoder_only: return "pmr_encoder_only";
    case Variant::pmr_enc_dec: return "pmr_enc_dec";
    case Variant::pmr_decoder_only: return "pmr_decoder_only";
    case Variant::full: return "full";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (variant_name(v) == name) return v;
  }
  throw UnknownVariantError("unknown variant '" + std::string(name) +
                            "' (expected baseline, pmr_encoder_only, "
                            "pmr_enc_dec, pmr_decoder_only or full)");
}

Variant default_variant(const NetworkConfig& cfg) {
  return cfg.num_branches == 1 ? Variant::baseline : Variant::full;
}

template <typename T>
SegmentationModel<T>::SegmentationModel(const NetworkConfig& cfg,
                                        Variant variant, std::uint64_t seed)
    : cfg_(cfg), variant_(variant), params_(std::make_unique<ParameterSet<T>>()) {
  // Range checks only; any extent divisible by the divisor is accepted.
  const std::size_t div = pmrnet::required_divisor(cfg);
  validate_config(cfg, Extent{div, div});

  const int B = cfg.num_branches;
  const bool multi_encoder = variant == Variant::pmr_encoder_only ||
                             variant == Variant::pmr_enc_dec ||
                             variant == Variant::full;
  const bool multi_decoder = variant == Variant::pmr_enc_dec ||
                             variant == Variant::pmr_decoder_only ||
                             variant == Variant::full;
  encoder_branches_ = multi_encoder ? B : 1;

  std::mt19937_64 rng(seed);
  BuildContext<T> root{params_.get(), &rng, ""};
  encoder_ = std::make_unique<PmrEncoder<T>>(root.child("encoder"), cfg,
                                             encoder_branches_,
                                             /*deepest_all_branches=*/multi_decoder);
  skips_ = std::make_unique<SkipNest<T>>(root.child("skips"), cfg);
  if (variant == Variant::full) {
    context_ = std::make_unique<MrContext<T>>(root.child("context"), cfg, B);
  }
  if (multi_decoder) {
    decoder_ = std::make_unique<PmrDecoder<T>>(root.child("decoder"), cfg, B,
                                               /*use_skips=*/true);
  }
  head_ = SegmentationHead<T>(root.child("head"), channels_at(cfg, 1));
}

template <typename T>
std::size_t SegmentationModel<T>::required_divisor() const {
  const int b = std::max(encoder_branches_, decoder_branches());
  return std::size_t{1} << ((cfg_.num_layers - 1) + (b - 1));
}

template <typename T>
ForwardTrace<T> SegmentationModel<T>::forward(const Var<T>& images,
                                              bool training) {
  const Shape s = images->shape();
  if (static_cast<int>(s.c) != cfg_.in_channels) {
    throw ShapeError("model expects " + std::to_string(cfg_.in_channels) +
                     " input channels, got " + s.to_string());
  }
  const std::size_t div = required_divisor();
  if (s.h % div != 0 || s.w % div != 0) {
    throw DivisibilityError("input " + s.extent().to_string() +
                            " not divisible by " + std::to_string(div));
  }
  const int L = cfg_.num_layers;
  ForwardTrace<T> trace;
  const auto inputs = make_branch_inputs(images, encoder_branches_);
  trace.pyramid = encoder_->forward(inputs, training);

  std::vector<Var<T>> branch0;
  for (int i = 1; i <= L; ++i) branch0.push_back(trace.pyramid.at({i, 0}).var);
  trace.skips = skips_->forward(branch0, training);

  Var<T> features;
  if (!decoder_) {
    features = trace.skips->outputs.at(1).var;
  } else {
    std::vector<Var<T>> deepest;
    for (int j = 0; j < encoder_branches_; ++j) {
      deepest.push_back(trace.pyramid.at({L, j}).var);
    }
    if (context_) {
      trace.context = context_->forward(deepest, training);
    } else if (encoder_branches_ == decoder_->branches()) {
      trace.context = context_passthrough<T>(deepest, L);
    } else {
      trace.context = context_from_pooling(deepest[0], L, decoder_->branches());
    }
    trace.decoder = decoder_->forward(*trace.context, &*trace.skips,
                                      s.extent(), training);
    features = trace.decoder.at({1, 0}).var;
  }
  trace.probabilities = head_.probabilities(features);
  return trace;
}

template <typename T>
Var<T> SegmentationModel<T>::probabilities(const Tensor<T>& images,
                                           bool training) {
  return forward(make_leaf(images), training).probabilities;
}

template <typename T>
SegmentationOutput<T> SegmentationModel<T>::predict(const Tensor<T>& images) {
  NoGradGuard guard;
  SegmentationOutput<T> out;
  out.probabilities = probabilities(images, false)->value;
  out.mask = binarize(out.probabilities, cfg_.threshold);
  return out;
}

template <typename T>
std::unique_ptr<SegmentationModel<T>> build_model(const NetworkConfig& cfg,
                                                  std::uint64_t seed) {
  return std::make_unique<SegmentationModel<T>>(cfg, default_variant(cfg), seed);
}

template <typename T>
std::unique_ptr<SegmentationModel<T>> build_variant(const NetworkConfig& cfg,
                                                    Variant variant,
                                                    std::uint64_t seed) {
  return std::make_unique<SegmentationModel<T>>(cfg, variant, seed);
}

template <typename Dst, typename Src>
void copy_state(const ParameterSet<Src>& src, ParameterSet<Dst>& dst) {
  for (const auto& e : dst.entries()) {
    const Var<Src> from = src.find(e.name);
    if (!from) throw Error("copy_state: source has no entry " + e.name);
    if (from->shape() != e.var->shape()) {
      throw ShapeError("copy_state: " + e.name + " " + from->shape().to_string() +
                       " vs " + e.var->shape().to_string());
    }
    e.var->value = from->value.template cast<Dst>();
  }
}

template class SegmentationModel<float>;
template class SegmentationModel<double>;
template class SegmentationModel<long double>;
template std::unique_ptr<SegmentationModel<float>> build_model<float>(const NetworkConfig&, std::uint64_t);
template std::unique_ptr<SegmentationModel<double>> build_model<double>(const NetworkConfig&, std::uint64_t);
template std::unique_ptr<SegmentationModel<long double>> build_model<long double>(const NetworkConfig&, std::uint64_t);
template std::unique_ptr<SegmentationModel<float>> build_variant<float>(const NetworkConfig&, Variant, std::uint64_t);
template std::unique_ptr<SegmentationModel<double>> build_variant<double>(const NetworkConfig&, Variant, std::uint64_t);
template std::unique_ptr<SegmentationModel<long double>> build_variant<long double>(const NetworkConfig&, Variant, std::uint64_t);
template void copy_state<float, float>(const ParameterSet<float>&, ParameterSet<float>&);
template void copy_state<double, float>(const ParameterSet<float>&, ParameterSet<double>&);
template void copy_state<float, double>(const ParameterSet<double>&, ParameterSet<float>&);
template void copy_state<double, double>(const ParameterSet<double>&, ParameterSet<double>&);
template void copy_state<long double, double>(const ParameterSet<double>&, ParameterSet<long double>&);

}  // namespace pmrnet
