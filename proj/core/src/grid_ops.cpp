#include "vebm/grid_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vebm {

GridScaler::GridScaler(std::size_t factor) : factor_(factor) {
  if (factor_ < 1) throw ConfigError("scaling factor must be >= 1");
}

namespace {

void require_divisible(const Extent3& e, std::size_t d) {
  if (e.d % d || e.h % d || e.w % d) {
    throw ShapeError("grid " + std::to_string(e.d) + "x" + std::to_string(e.h) +
                     "x" + std::to_string(e.w) + " is not divisible by factor " +
                     std::to_string(d));
  }
}

}  // namespace

Tensor GridScaler::downscale(const Tensor& batch) const {
  const Extent3 in = spatial_extent(batch.shape());
  require_divisible(in, factor_);
  const std::size_t d = factor_;
  const Extent3 out{in.d / d, in.h / d, in.w / d};
  const std::size_t slabs = batch.dim(0) * batch.dim(1);
  Tensor y({batch.dim(0), batch.dim(1), out.d, out.h, out.w});
  const double inv = 1.0 / static_cast<double>(d * d * d);
  for (std::size_t s = 0; s < slabs; ++s) {
    const float* src = batch.raw() + s * in.volume();
    float* dst = y.raw() + s * out.volume();
    for (std::size_t oz = 0; oz < out.d; ++oz) {
      for (std::size_t oy = 0; oy < out.h; ++oy) {
        for (std::size_t ox = 0; ox < out.w; ++ox) {
          double acc = 0.0;
          for (std::size_t z = oz * d; z < (oz + 1) * d; ++z) {
            for (std::size_t yy = oy * d; yy < (oy + 1) * d; ++yy) {
              const float* row = src + (z * in.h + yy) * in.w;
              for (std::size_t x = ox * d; x < (ox + 1) * d; ++x) acc += row[x];
            }
          }
          dst[(oz * out.h + oy) * out.w + ox] = static_cast<float>(acc * inv);
        }
      }
    }
  }
  return y;
}

Tensor GridScaler::upscale(const Tensor& batch) const {
  const Extent3 in = spatial_extent(batch.shape());
  const std::size_t d = factor_;
  const Extent3 out{in.d * d, in.h * d, in.w * d};
  const std::size_t slabs = batch.dim(0) * batch.dim(1);
  Tensor y({batch.dim(0), batch.dim(1), out.d, out.h, out.w});
  for (std::size_t s = 0; s < slabs; ++s) {
    const float* src = batch.raw() + s * in.volume();
    float* dst = y.raw() + s * out.volume();
    for (std::size_t z = 0; z < out.d; ++z) {
      for (std::size_t yy = 0; yy < out.h; ++yy) {
        const float* row = src + ((z / d) * in.h + yy / d) * in.w;
        float* out_row = dst + (z * out.h + yy) * out.w;
        for (std::size_t x = 0; x < out.w; ++x) out_row[x] = row[x / d];
      }
    }
  }
  return y;
}

Tensor GridScaler::project_null(const Tensor& delta) const {
  const Extent3 in = spatial_extent(delta.shape());
  require_divisible(in, factor_);
  const std::size_t d = factor_;
  const Extent3 blocks{in.d / d, in.h / d, in.w / d};
  const std::size_t slabs = delta.dim(0) * delta.dim(1);
  const double inv = 1.0 / static_cast<double>(d * d * d);
  Tensor out = delta;
  // Subtract each block's mean in place, in double.
  for (std::size_t s = 0; s < slabs; ++s) {
    float* v = out.raw() + s * in.volume();
    for (std::size_t bz = 0; bz < blocks.d; ++bz) {
      for (std::size_t by = 0; by < blocks.h; ++by) {
        for (std::size_t bx = 0; bx < blocks.w; ++bx) {
          double acc = 0.0;
          for (std::size_t z = bz * d; z < (bz + 1) * d; ++z)
            for (std::size_t y = by * d; y < (by + 1) * d; ++y)
              for (std::size_t x = bx * d; x < (bx + 1) * d; ++x)
                acc += v[(z * in.h + y) * in.w + x];
          const double mean = acc * inv;
          for (std::size_t z = bz * d; z < (bz + 1) * d; ++z)
            for (std::size_t y = by * d; y < (by + 1) * d; ++y)
              for (std::size_t x = bx * d; x < (bx + 1) * d; ++x) {
                float& e = v[(z * in.h + y) * in.w + x];
                e = static_cast<float>(e - mean);
              }
        }
      }
    }
  }
  return out;
}

VoxelGrid GridScaler::downscale(const VoxelGrid& grid) const {
  return unstack(downscale(grid.as_batch()), 0);
}

VoxelGrid GridScaler::upscale(const VoxelGrid& grid) const {
  return unstack(upscale(grid.as_batch()), 0);
}

namespace {

void require_ladder(const Extent3& e, std::span<const std::size_t> factors) {
  std::size_t total = 1;
  for (std::size_t f : factors) {
    if (f < 1) throw ConfigError("pyramid factors must be >= 1");
    total *= f;
  }
  if (e.d != total || e.h != total || e.w != total) {
    throw ConfigError("pyramid factors multiply to " + std::to_string(total) +
                      " but the grid is " + std::to_string(e.d) + "x" +
                      std::to_string(e.h) + "x" + std::to_string(e.w));
  }
}

}  // namespace

std::vector<Tensor> build_pyramid(const Tensor& batch,
                                  std::span<const std::size_t> factors) {
  require_ladder(spatial_extent(batch.shape()), factors);
  std::vector<Tensor> levels(factors.size() + 1);
  levels.back() = batch;
  for (std::size_t s = factors.size(); s-- > 0;) {
    levels[s] = GridScaler(factors[s]).downscale(levels[s + 1]);
  }
  return levels;
}

GridPyramid build_pyramid(const VoxelGrid& grid, std::span<const std::size_t> factors) {
  GridPyramid p;
  for (const Tensor& level : build_pyramid(grid.as_batch(), factors)) {
    p.levels.push_back(unstack(level, 0));
  }
  return p;
}

HistogramModel fit_histogram(std::span<const double> values, std::size_t bins) {
  if (values.empty()) throw ConfigError("histogram needs at least one observation");
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) {
    // Degenerate data: a single narrow bin around the value.
    const double pad = 1e-6 * std::max(1.0, std::abs(lo));
    lo -= pad;
    hi += pad;
    bins = 1;
  }
  HistogramModel m;
  m.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) {
    m.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  }
  m.edges.back() = hi;
  std::vector<double> counts(bins, 0.0);
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    counts[std::min(b, bins - 1)] += 1.0;
  }
  m.probabilities.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    m.probabilities[b] = counts[b] / static_cast<double>(values.size());
  }
  return m;
}

double sample_histogram_value(const HistogramModel& model, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t bin = model.bins() - 1;
  for (std::size_t b = 0; b < model.bins(); ++b) {
    cumulative += model.probabilities[b];
    if (u < cumulative) {
      bin = b;
      break;
    }
  }
  // Skip trailing empty bins picked through rounding of the cumulative sum.
  while (bin > 0 && model.probabilities[bin] == 0.0) --bin;
  const double lo = model.edges[bin], hi = model.edges[bin + 1];
  return lo + (hi - lo) * rng.uniform();
}

VoxelGrid sample_histogram(const HistogramModel& model, Rng& rng) {
  return VoxelGrid({1, 1, 1}, static_cast<float>(sample_histogram_value(model, rng)));
}

}  // namespace vebm
