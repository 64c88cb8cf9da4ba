#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vebm/kernels.hpp"
#include "vebm/tensor.hpp"

namespace vebm {

/// Single-channel D×H×W grid, x (last axis) fastest.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  explicit VoxelGrid(Extent3 extents, float fill = 0.0f);
  VoxelGrid(Extent3 extents, std::vector<float> values);

  Extent3 extents() const { return extents_; }
  std::size_t size() const { return values_.size(); }
  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  float& at(std::size_t z, std::size_t y, std::size_t x) {
    return values_[(z * extents_.h + y) * extents_.w + x];
  }
  float at(std::size_t z, std::size_t y, std::size_t x) const {
    return values_[(z * extents_.h + y) * extents_.w + x];
  }

  /// Every value is exactly 0 or 1.
  bool is_binary() const;
  double mean() const;

  /// [1, 1, D, H, W] view as a tensor (copy).
  Tensor as_batch() const;

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

 private:
  Extent3 extents_{0, 0, 0};
  std::vector<float> values_;
};

/// [N, 1, D, H, W] from N grids of equal extents.
Tensor stack(std::span<const VoxelGrid> grids);
/// Sample `index` of an [N, 1, D, H, W] batch.
VoxelGrid unstack(const Tensor& batch, std::size_t index);
std::vector<VoxelGrid> unstack_all(const Tensor& batch);

/// Boolean grid; true marks a free (corrupted) voxel, false an observed one.
class CorruptionMask {
 public:
  CorruptionMask() = default;
  explicit CorruptionMask(Extent3 extents, bool fill = false)
      : extents_(extents), free_(extents.volume(), fill ? 1 : 0) {}

  Extent3 extents() const { return extents_; }
  std::size_t size() const { return free_.size(); }
  bool is_free(std::size_t i) const { return free_[i] != 0; }
  void set_free(std::size_t i, bool value) { free_[i] = value ? 1 : 0; }
  std::size_t free_count() const;

  friend bool operator==(const CorruptionMask&, const CorruptionMask&) = default;

 private:
  Extent3 extents_{0, 0, 0};
  std::vector<unsigned char> free_;
};

}  // namespace vebm
