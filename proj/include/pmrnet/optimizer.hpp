#pragma once

#include <cstdint>
#include <vector>

#include "pmrnet/blocks.hpp"

namespace pmrnet {

struct AdamSettings {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Classic L2: weight_decay * theta is added to the gradient before the
  // moment updates.
  double weight_decay = 1e-5;
};

template <typename T>
class Adam {
 public:
  Adam(const ParameterSet<T>& params, AdamSettings settings);

  // One update from the gradients currently stored on the parameters.
  // Parameters without a gradient are left unchanged.
  void step();

  std::uint64_t steps() const { return steps_; }
  const AdamSettings& settings() const { return settings_; }

  // Moment buffers in parameter order, for checkpointing.
  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  void set_steps(std::uint64_t s) { steps_ = s; }

 private:
  std::vector<Var<T>> params_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  AdamSettings settings_;
  std::uint64_t steps_ = 0;
};

}  // namespace pmrnet
