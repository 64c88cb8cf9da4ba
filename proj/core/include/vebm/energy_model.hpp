#pragma once

// The descriptor density p(Y) ∝ exp(f(Y; θ)) · N(Y; 0, s² I).
//
// Voxel batches are tensors shaped [N, 1, D, H, W]. The network's last layer
// is a bias-free fully connected unit, so f has one scalar per sample.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vebm/kernels.hpp"
#include "vebm/layers.hpp"
#include "vebm/rng.hpp"

namespace vebm {

struct DescriptorArchitecture {
  std::vector<LayerSpec> layers;
  Extent3 grid;
};

/// Named descriptor architectures ("paper-synthesis-32", "desk-synthesis-16", ...).
DescriptorArchitecture descriptor_preset(std::string_view name);
std::vector<std::string> descriptor_preset_names();

class DescriptorModel {
 public:
  /// Builds the graph and draws weights from N(0, 0.01^2) with `init_seed`.
  DescriptorModel(DescriptorArchitecture arch, double ref_std, std::uint64_t init_seed);

  const DescriptorArchitecture& architecture() const { return arch_; }
  Extent3 grid() const { return arch_.grid; }
  double ref_std() const { return ref_std_; }

  const Graph& graph() const { return net_.graph; }
  const NetworkLayout& layout() const { return net_; }
  NodeId input_node() const { return net_.input; }
  NodeId score_node() const { return net_.output; }
  /// Sum of per-sample scores; the seed for every backward pass.
  NodeId total_node() const { return total_; }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// Bindings for the parameters plus `batch` on the input leaf.
  Bindings<float> bind(const Tensor& batch) const;
  /// Throws ShapeError unless `batch` is [N >= 1, 1, D, H, W] on this grid.
  void check_batch(const Tensor& batch) const;

 private:
  DescriptorArchitecture arch_;
  double ref_std_;
  NetworkLayout net_;
  NodeId total_ = 0;
  ParamSet params_;
};

/// f(Y_i; θ) per sample.
std::vector<double> score(const DescriptorModel& model, const Tensor& batch);

/// E(Y_i; θ) = ||Y_i||² / (2 s²) - f(Y_i; θ) per sample.
std::vector<double> energy(const DescriptorModel& model, const Tensor& batch);

/// ∂f/∂Y, same shape as `batch`.
Tensor score_grad_input(const DescriptorModel& model, const Tensor& batch);

/// Y / s² - ∂f/∂Y; zero exactly at critical points of the energy.
Tensor hopfield_residual(const DescriptorModel& model, const Tensor& batch);

/// Σ_i ∂f(Y_i)/∂θ, one tensor per parameter in ParamSet order.
std::vector<Tensor> score_grad_params(const DescriptorModel& model,
                                      const Tensor& batch);

/// ||Y_i||² per sample, accumulated in double.
std::vector<double> squared_norms(const Tensor& batch);

}  // namespace vebm
