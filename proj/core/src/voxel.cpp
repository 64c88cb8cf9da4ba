#include "vebm/voxel.hpp"

#include <algorithm>
#include <string>

namespace vebm {

VoxelGrid::VoxelGrid(Extent3 extents, float fill)
    : extents_(extents), values_(extents.volume(), fill) {
  if (extents.d < 1 || extents.h < 1 || extents.w < 1) {
    throw ShapeError("voxel grid extents must be >= 1");
  }
}

VoxelGrid::VoxelGrid(Extent3 extents, std::vector<float> values)
    : extents_(extents), values_(std::move(values)) {
  if (extents.d < 1 || extents.h < 1 || extents.w < 1) {
    throw ShapeError("voxel grid extents must be >= 1");
  }
  if (values_.size() != extents.volume()) {
    throw ShapeError("voxel grid holds " + std::to_string(values_.size()) +
                     " values for " + std::to_string(extents.volume()) + " voxels");
  }
}

bool VoxelGrid::is_binary() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](float v) { return v == 0.0f || v == 1.0f; });
}

double VoxelGrid::mean() const {
  double acc = 0.0;
  for (float v : values_) acc += v;
  return values_.empty() ? 0.0 : acc / static_cast<double>(values_.size());
}

Tensor VoxelGrid::as_batch() const {
  return Tensor({1, 1, extents_.d, extents_.h, extents_.w}, values_);
}

Tensor stack(std::span<const VoxelGrid> grids) {
  if (grids.empty()) throw ShapeError("stack: no grids");
  const Extent3 e = grids.front().extents();
  Tensor out({grids.size(), 1, e.d, e.h, e.w});
  for (std::size_t i = 0; i < grids.size(); ++i) {
    if (!(grids[i].extents() == e)) throw ShapeError("stack: grid extents differ");
    std::copy(grids[i].values().begin(), grids[i].values().end(),
              out.raw() + i * e.volume());
  }
  return out;
}

VoxelGrid unstack(const Tensor& batch, std::size_t index) {
  const Extent3 e = spatial_extent(batch.shape());
  if (batch.dim(1) != 1) throw ShapeError("unstack: expected one channel");
  if (index >= batch.dim(0)) throw ShapeError("unstack: index out of range");
  const float* src = batch.raw() + index * e.volume();
  return VoxelGrid(e, std::vector<float>(src, src + e.volume()));
}

std::vector<VoxelGrid> unstack_all(const Tensor& batch) {
  std::vector<VoxelGrid> out;
  for (std::size_t i = 0; i < batch.dim(0); ++i) out.push_back(unstack(batch, i));
  return out;
}

std::size_t CorruptionMask::free_count() const {
  return static_cast<std::size_t>(std::count(free_.begin(), free_.end(), 1));
}

}  // namespace vebm
