#pragma once

// Top-down generator Y = g(Z; α) + ε with Z ~ N(0, I_d), ε ~ N(0, σ² I).

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vebm/kernels.hpp"
#include "vebm/layers.hpp"
#include "vebm/rng.hpp"
#include "vebm/voxel.hpp"

namespace vebm {

struct GeneratorArchitecture {
  std::size_t latent_dim = 32;
  std::vector<LayerSpec> layers;  // starts with a reshaping FC, ends with tanh
  Extent3 grid;
};

/// "paper-coop-32" or "desk-coop-16".
GeneratorArchitecture generator_preset(std::string_view name);
std::vector<std::string> generator_preset_names();

inline constexpr double kRunningStatMomentum = 0.9;

class GeneratorModel {
 public:
  GeneratorModel(GeneratorArchitecture arch, double noise_std, std::uint64_t init_seed);

  const GeneratorArchitecture& architecture() const { return arch_; }
  std::size_t latent_dim() const { return arch_.latent_dim; }
  Extent3 grid() const { return arch_.grid; }
  double noise_std() const { return noise_std_; }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  /// Batchnorm running statistics.
  ParamSet& buffers() { return buffers_; }
  const ParamSet& buffers() const { return buffers_; }

  /// Graph with batchnorm on batch statistics; its layout is shared with the
  /// inference graph.
  const NetworkLayout& train_layout() const { return train_; }
  const Graph& inference_graph() const { return inference_; }

  /// g(Z) for a [N, d] latent batch using running statistics.
  Tensor generate_batch(const Tensor& latents) const;

  /// One regression step of the generator: forward with batch statistics,
  /// returns (1/(N·D)) Σ ||target_i - g(Z_i)||² and the gradient of that loss
  /// per parameter. Running statistics are updated with momentum 0.9.
  struct RegressionResult {
    double loss = 0.0;
    std::vector<Tensor> grads;
    Tensor output;  // g(Z) under batch statistics
  };
  RegressionResult regression_grad(const Tensor& latents, const Tensor& target);

  /// g(Z) under batch statistics, without touching running statistics.
  Tensor generate_training(const Tensor& latents) const;

 private:
  Bindings<float> bind(const Tensor& latents) const;
  void check_latents(const Tensor& latents) const;

  GeneratorArchitecture arch_;
  double noise_std_;
  NetworkLayout train_;
  NodeId target_ = 0;
  NodeId loss_ = 0;
  Graph inference_;
  ParamSet params_;
  ParamSet buffers_;
};

/// d i.i.d. standard normal values.
std::vector<float> sample_prior(std::size_t d, Rng& rng);
/// [n, d] batch of prior draws, one row per call to `sample_prior`.
Tensor sample_prior_batch(std::size_t n, std::size_t d, Rng& rng);

/// g(Z), plus N(0, σ²) noise drawn from `rng` when `add_noise`.
VoxelGrid generate(const GeneratorModel& model, std::span<const float> latent,
                   Rng& rng, bool add_noise);

/// Noiseless g((1 - ρ) Z0 + ρ Z1) for every ρ, in order.
std::vector<VoxelGrid> interpolate(const GeneratorModel& model,
                                   std::span<const float> z0,
                                   std::span<const float> z1,
                                   std::span<const double> rhos);

/// `count` evenly spaced ρ values covering [0, 1].
std::vector<double> interpolation_grid(std::size_t count);

/// Noiseless g(Za - Zb + Zc).
VoxelGrid latent_arithmetic(const GeneratorModel& model, std::span<const float> za,
                            std::span<const float> zb, std::span<const float> zc);

}  // namespace vebm
