#include "vebm/langevin.hpp"

#include <cmath>
#include <string>

namespace vebm {

void LangevinConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw ConfigError("Langevin step size must be positive");
  }
}

std::vector<Rng> chain_rngs(std::uint64_t seed, std::size_t count,
                            std::size_t first_index) {
  std::vector<Rng> rngs;
  rngs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) rngs.push_back(Rng::stream(seed, first_index + i));
  return rngs;
}

namespace {

void check_diverged(const Tensor& y, std::size_t step) {
  for (float v : y.data()) {
    if (!std::isfinite(v) || std::abs(v) > kDivergenceLimit) {
      throw DivergenceError("Langevin chain diverged at step " + std::to_string(step) +
                                " (|voxel| > 1e3 or non-finite); reduce the step size",
                            step);
    }
  }
}

Tensor step_impl(const DescriptorModel& model, const Tensor& batch,
                 const LangevinConfig& cfg, std::span<Rng> rngs, std::size_t step) {
  cfg.validate();
  const std::size_t chains = batch.dim(0);
  if (cfg.noise && rngs.size() < chains) {
    throw ShapeError("Langevin: " + std::to_string(chains) + " chains but " +
                     std::to_string(rngs.size()) + " random streams");
  }
  const Tensor grad = score_grad_input(model, batch);
  const double half = 0.5 * cfg.step_size;
  const double inv_s2 = 1.0 / (model.ref_std() * model.ref_std());
  const double noise_scale = std::sqrt(cfg.step_size);
  const std::size_t per = batch.size() / chains;
  Tensor out(batch.shape());
  for (std::size_t c = 0; c < chains; ++c) {
    for (std::size_t k = c * per; k < (c + 1) * per; ++k) {
      double v = batch[k] - half * (batch[k] * inv_s2 - grad[k]);
      if (cfg.noise) v += noise_scale * rngs[c].normal();
      out[k] = static_cast<float>(v);
    }
  }
  check_diverged(out, step);
  return out;
}

void check_masks(const Tensor& batch, std::span<const CorruptionMask> masks) {
  const Extent3 e = spatial_extent(batch.shape());
  if (masks.size() != batch.dim(0)) {
    throw ShapeError("conditional Langevin: one mask per chain required");
  }
  for (const CorruptionMask& m : masks) {
    if (!(m.extents() == e)) throw ShapeError("conditional Langevin: mask extents differ");
  }
}

Tensor conditional_impl(const DescriptorModel& model, const Tensor& batch,
                        std::span<const CorruptionMask> masks,
                        const LangevinConfig& cfg, std::span<Rng> rngs,
                        std::size_t step) {
  Tensor out = step_impl(model, batch, cfg, rngs, step);
  const std::size_t per = batch.size() / batch.dim(0);
  for (std::size_t c = 0; c < masks.size(); ++c) {
    for (std::size_t k = 0; k < per; ++k) {
      if (!masks[c].is_free(k)) out[c * per + k] = batch[c * per + k];
    }
  }
  return out;
}

Tensor projected_impl(const DescriptorModel& model, const Tensor& batch,
                      const GridScaler& scaler, const LangevinConfig& cfg,
                      std::span<Rng> rngs, std::size_t step) {
  const Tensor moved = step_impl(model, batch, cfg, rngs, step);
  Tensor delta(batch.shape());
  for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = moved[k] - batch[k];
  const Tensor projected = scaler.project_null(delta);
  Tensor out = batch;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += projected[k];
  return out;
}

}  // namespace

Tensor langevin_step(const DescriptorModel& model, const Tensor& batch,
                     const LangevinConfig& cfg, std::span<Rng> rngs) {
  return step_impl(model, batch, cfg, rngs, 0);
}

Tensor run_chain(const DescriptorModel& model, const Tensor& start,
                 const LangevinConfig& cfg, std::span<Rng> rngs) {
  cfg.validate();
  Tensor y = start;
  for (std::size_t k = 0; k < cfg.steps; ++k) y = step_impl(model, y, cfg, rngs, k);
  return y;
}

Tensor conditional_step(const DescriptorModel& model, const Tensor& batch,
                        std::span<const CorruptionMask> masks,
                        const LangevinConfig& cfg, std::span<Rng> rngs) {
  check_masks(batch, masks);
  return conditional_impl(model, batch, masks, cfg, rngs, 0);
}

Tensor run_conditional_chain(const DescriptorModel& model, const Tensor& start,
                             std::span<const CorruptionMask> masks,
                             const LangevinConfig& cfg, std::span<Rng> rngs) {
  cfg.validate();
  check_masks(start, masks);
  Tensor y = start;
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    y = conditional_impl(model, y, masks, cfg, rngs, k);
  }
  return y;
}

Tensor projected_step(const DescriptorModel& model, const Tensor& batch,
                      const GridScaler& scaler, const LangevinConfig& cfg,
                      std::span<Rng> rngs) {
  return projected_impl(model, batch, scaler, cfg, rngs, 0);
}

Tensor run_projected_chain(const DescriptorModel& model, const Tensor& start,
                           const GridScaler& scaler, const LangevinConfig& cfg,
                           std::span<Rng> rngs) {
  cfg.validate();
  Tensor y = start;
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    y = projected_impl(model, y, scaler, cfg, rngs, k);
  }
  return y;
}

}  // namespace vebm
