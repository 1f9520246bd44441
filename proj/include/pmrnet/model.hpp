#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pmrnet/context.hpp"
#include "pmrnet/decoder.hpp"
#include "pmrnet/encoder.hpp"

namespace pmrnet {

// Ablation variants in table order.
enum class Variant {
  baseline,          // single-branch encoder, nested skips, head on f*_1
  pmr_encoder_only,  // multi-branch encoder, nested skips, head on f*_1
  pmr_enc_dec,       // multi-branch encoder and decoder, no context module
  pmr_decoder_only,  // single-branch encoder pooled into a multi-branch decoder
  full,
};

inline constexpr std::array<Variant, 5> kAllVariants{
    Variant::baseline, Variant::pmr_encoder_only, Variant::pmr_enc_dec,
    Variant::pmr_decoder_only, Variant::full};

std::string_view variant_name(Variant v);
// UnknownVariantError for anything else.
Variant parse_variant(std::string_view name);

// Variant chosen by build_model: full for B >= 2, baseline for B = 1.
Variant default_variant(const NetworkConfig& cfg);

template <typename T>
struct ForwardTrace {
  FeaturePyramid<T> pyramid;
  std::optional<ContextSet<T>> context;
  std::optional<SkipPathway<T>> skips;
  DecoderMaps<T> decoder;
  Var<T> probabilities;  // (N, 1, H, W)
};

template <typename T>
class SegmentationModel {
 public:
  SegmentationModel(const NetworkConfig& cfg, Variant variant,
                    std::uint64_t seed);
  SegmentationModel(const SegmentationModel&) = delete;
  SegmentationModel& operator=(const SegmentationModel&) = delete;

  // Throws DivisibilityError / ShapeError for unsupported inputs.
  ForwardTrace<T> forward(const Var<T>& images, bool training);
  Var<T> probabilities(const Tensor<T>& images, bool training);
  // Eval-mode, no-grad prediction.
  SegmentationOutput<T> predict(const Tensor<T>& images);

  const NetworkConfig& config() const { return cfg_; }
  Variant variant() const { return variant_; }
  // Branch count of the encoder (1 for the single-branch variants).
  int encoder_branches() const { return encoder_branches_; }
  int decoder_branches() const { return decoder_ ? decoder_->branches() : 0; }
  std::size_t required_divisor() const;

  ParameterSet<T>& params() { return *params_; }
  const ParameterSet<T>& params() const { return *params_; }
  std::size_t count_params() const { return params_->parameter_count(); }

 private:
  NetworkConfig cfg_;
  Variant variant_;
  int encoder_branches_;
  std::unique_ptr<ParameterSet<T>> params_;
  std::unique_ptr<PmrEncoder<T>> encoder_;
  std::unique_ptr<SkipNest<T>> skips_;
  std::unique_ptr<MrContext<T>> context_;
  std::unique_ptr<PmrDecoder<T>> decoder_;
  SegmentationHead<T> head_;
};

template <typename T>
std::unique_ptr<SegmentationModel<T>> build_model(const NetworkConfig& cfg,
                                                  std::uint64_t seed);
template <typename T>
std::unique_ptr<SegmentationModel<T>> build_variant(const NetworkConfig& cfg,
                                                    Variant variant,
                                                    std::uint64_t seed);

// Copy values of every same-named entry; ShapeError when shapes differ and
// Error when an entry is missing from src.
template <typename Dst, typename Src>
void copy_state(const ParameterSet<Src>& src, ParameterSet<Dst>& dst);

}  // namespace pmrnet
