#pragma once

// Block-average down-scaling C, its pseudo-inverse C⁻ (block replication),
// coarse-to-fine pyramids and the 1×1×1 histogram model.

#include <cstddef>
#include <span>
#include <vector>

#include "vebm/rng.hpp"
#include "vebm/tensor.hpp"
#include "vebm/voxel.hpp"

namespace vebm {

class GridScaler {
 public:
  explicit GridScaler(std::size_t factor);

  std::size_t factor() const { return factor_; }

  /// C: mean of every factor³ block. Input [N, C, D, H, W] with each spatial
  /// extent divisible by the factor.
  Tensor downscale(const Tensor& batch) const;
  /// C⁻: replicate every voxel into a constant factor³ block.
  Tensor upscale(const Tensor& batch) const;
  /// (I - C⁻C) delta, the component of delta invisible to C.
  Tensor project_null(const Tensor& delta) const;

  VoxelGrid downscale(const VoxelGrid& grid) const;
  VoxelGrid upscale(const VoxelGrid& grid) const;

 private:
  std::size_t factor_;
};

/// Levels ordered coarse to fine; levels.front() is 1×1×1.
struct GridPyramid {
  std::vector<VoxelGrid> levels;
};

/// `factors[s]` is the size ratio between level s and level s+1. Their
/// product must equal every extent of `grid`.
GridPyramid build_pyramid(const VoxelGrid& grid, std::span<const std::size_t> factors);

/// Batched variant: one [N, 1, ...] tensor per level, coarse to fine.
std::vector<Tensor> build_pyramid(const Tensor& batch, std::span<const std::size_t> factors);

struct HistogramModel {
  std::vector<double> edges;          // bins + 1, strictly increasing
  std::vector<double> probabilities;  // sums to 1

  std::size_t bins() const { return probabilities.size(); }
  friend bool operator==(const HistogramModel&, const HistogramModel&) = default;
};

/// Uniform bins over [min, max] of `values`.
HistogramModel fit_histogram(std::span<const double> values, std::size_t bins = 32);

/// Draws a bin by probability, then a uniform value inside it.
double sample_histogram_value(const HistogramModel& model, Rng& rng);
VoxelGrid sample_histogram(const HistogramModel& model, Rng& rng);

}  // namespace vebm
