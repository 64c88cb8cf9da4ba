#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vebm/layers.hpp"
#include "vebm/tensor.hpp"

namespace vebm {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Whether `adam_step` walks against the supplied gradient or along it.
enum class Objective { kMinimize, kMaximize };

struct AdamState {
  AdamConfig config;
  Objective objective = Objective::kMinimize;
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

AdamState make_adam_state(const ParamSet& params, AdamConfig config,
                          Objective objective);

/// Bias-corrected Adam. `config.learning_rate` is read every call, so a
/// schedule is applied by adjusting it between steps.
void adam_step(ParamSet& params, std::span<const Tensor> grads, AdamState& state);

}  // namespace vebm
