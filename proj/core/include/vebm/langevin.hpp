#pragma once

// Langevin samplers for the descriptor density:
//
//   Y' = Y - (Δτ/2) [Y/s² - ∂f/∂Y] + sqrt(Δτ) ε,   ε ~ N(0, I)
//
// Chains are the samples of an [N, 1, D, H, W] batch. Each chain draws its
// noise from its own Rng, so results do not depend on how chains are grouped
// into batches.

#include <cstddef>
#include <span>
#include <vector>

#include "vebm/energy_model.hpp"
#include "vebm/grid_ops.hpp"
#include "vebm/rng.hpp"
#include "vebm/voxel.hpp"

namespace vebm {

struct LangevinConfig {
  double step_size = 0.01;  // Δτ
  std::size_t steps = 20;   // K
  bool noise = true;

  /// Throws ConfigError unless Δτ > 0.
  void validate() const;
  friend bool operator==(const LangevinConfig&, const LangevinConfig&) = default;
};

/// Any |voxel| above this aborts the chain.
inline constexpr double kDivergenceLimit = 1e3;

/// One unconstrained step. `rngs` needs one stream per chain when noise is on.
Tensor langevin_step(const DescriptorModel& model, const Tensor& batch,
                     const LangevinConfig& cfg, std::span<Rng> rngs);

/// K unconstrained steps.
Tensor run_chain(const DescriptorModel& model, const Tensor& start,
                 const LangevinConfig& cfg, std::span<Rng> rngs);

/// One step, then every observed voxel (mask false) is restored. One mask per chain.
Tensor conditional_step(const DescriptorModel& model, const Tensor& batch,
                        std::span<const CorruptionMask> masks,
                        const LangevinConfig& cfg, std::span<Rng> rngs);

Tensor run_conditional_chain(const DescriptorModel& model, const Tensor& start,
                             std::span<const CorruptionMask> masks,
                             const LangevinConfig& cfg, std::span<Rng> rngs);

/// Y + (I - C⁻C) ΔY where ΔY is the unconstrained step, so C·Y is unchanged.
Tensor projected_step(const DescriptorModel& model, const Tensor& batch,
                      const GridScaler& scaler, const LangevinConfig& cfg,
                      std::span<Rng> rngs);

Tensor run_projected_chain(const DescriptorModel& model, const Tensor& start,
                           const GridScaler& scaler, const LangevinConfig& cfg,
                           std::span<Rng> rngs);

/// One Rng per chain: stream(seed, first_index + i).
std::vector<Rng> chain_rngs(std::uint64_t seed, std::size_t count,
                            std::size_t first_index = 0);

}  // namespace vebm
