#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "vebm/langevin.hpp"

using namespace vebm;

namespace {

void zero_params(DescriptorModel& m) {
  for (std::size_t i = 0; i < m.params().size(); ++i) m.params()[i].fill(0.0f);
}

Tensor batch(std::size_t n, std::size_t count, std::uint64_t seed) {
  return oracle::random_tensor({count, 1, n, n, n}, seed, 0.5);
}

CorruptionMask random_mask(Extent3 e, std::uint64_t seed) {
  Rng rng(seed);
  CorruptionMask m(e);
  for (std::size_t i = 0; i < m.size(); ++i) m.set_free(i, rng.uniform() < 0.6);
  return m;
}

}  // namespace

TEST(Langevin, ZeroStepsIsIdentity) {
  DescriptorModel m(fixture::tiny_arch(8), 0.5, 1);
  const Tensor y = batch(8, 2, 1);
  auto rngs = chain_rngs(3, 2);
  EXPECT_EQ(run_chain(m, y, {0.01, 0, true}, rngs), y);
}

TEST(Langevin, ZeroModelContractsGeometrically) {
  DescriptorModel m(fixture::tiny_arch(8), 0.5, 1);
  zero_params(m);
  const Tensor y0 = batch(8, 2, 2);
  std::vector<Rng> none;
  const LangevinConfig cfg{0.01, 7, false};
  const Tensor y = run_chain(m, y0, cfg, none);
  const double factor = std::pow(1.0 - 0.01 / (2 * 0.25), 7);
  for (std::size_t k = 0; k < y.size(); ++k) EXPECT_NEAR(y[k], y0[k] * factor, 1e-6);
}

TEST(Langevin, NoisyTrajectoryIsReproducible) {
  const DescriptorModel m(fixture::tiny_arch(8), 0.5, 4);
  const Tensor y0 = batch(8, 3, 5);
  auto r1 = chain_rngs(11, 3);
  auto r2 = chain_rngs(11, 3);
  EXPECT_EQ(run_chain(m, y0, {0.01, 5, true}, r1), run_chain(m, y0, {0.01, 5, true}, r2));
}

TEST(Langevin, ChainsDoNotDependOnBatching) {
  const DescriptorModel m(fixture::tiny_arch(8), 0.5, 4);
  const Tensor y0 = batch(8, 2, 6);
  auto both = chain_rngs(9, 2);
  const auto joint = unstack_all(run_chain(m, y0, {0.01, 3, true}, both));
  auto second = chain_rngs(9, 1, 1);
  const VoxelGrid alone =
      unstack(run_chain(m, unstack(y0, 1).as_batch(), {0.01, 3, true}, second), 0);
  EXPECT_EQ(joint[1], alone);
}

TEST(Langevin, EnergyNonIncreasingWithSmallSteps) {
  const DescriptorModel m = fixture::trained_toy_model();
  Tensor y = batch(8, 2, 7);
  std::vector<Rng> none;
  const LangevinConfig cfg{1e-4, 1, false};
  auto prev = energy(m, y);
  for (int k = 0; k < 50; ++k) {
    y = langevin_step(m, y, cfg, none);
    const auto e = energy(m, y);
    for (std::size_t i = 0; i < e.size(); ++i) EXPECT_LE(e[i], prev[i] + 1e-6);
    prev = e;
  }
}

TEST(Langevin, DescentReducesHopfieldResidual) {
  const DescriptorModel m = fixture::trained_toy_model();
  const Tensor y0 = batch(8, 1, 8);
  std::vector<Rng> none;
  const Tensor y = run_chain(m, y0, {0.02, 400, false}, none);
  auto norm = [](const Tensor& t) {
    double s = 0.0;
    for (float v : t.data()) s += double(v) * v;
    return std::sqrt(s);
  };
  EXPECT_LT(norm(hopfield_residual(m, y)), norm(hopfield_residual(m, y0)));
}

TEST(Langevin, DivergenceIsReported) {
  const DescriptorModel m(fixture::tiny_arch(8), 0.5, 1);
  std::vector<Rng> none;
  // Δτ/(2s²) = 4 makes every step multiply by -3.
  EXPECT_THROW(run_chain(m, batch(8, 1, 9), {2.0, 20, false}, none), DivergenceError);
}

TEST(Langevin, RejectsNonPositiveStep) {
  EXPECT_THROW((LangevinConfig{0.0, 1, true}.validate()), ConfigError);
  EXPECT_THROW((LangevinConfig{-1.0, 1, true}.validate()), ConfigError);
}

TEST(Conditional, AllObservedIsFrozen) {
  const DescriptorModel m(fixture::tiny_arch(8), 0.5, 2);
  const Tensor y = batch(8, 1, 10);
  const CorruptionMask mask({8, 8, 8}, false);
  auto rngs = chain_rngs(1, 1);
  EXPECT_EQ(conditional_step(m, y, std::span(&mask, 1), {0.01, 1, true}, rngs), y);
}

TEST(Conditional, AllFreeMatchesUnconditional) {
  const DescriptorModel m(fixture::tiny_arch(8), 0.5, 2);
  const Tensor y = batch(8, 1, 11);
  const CorruptionMask mask({8, 8, 8}, true);
  auto r1 = chain_rngs(5, 1);
  auto r2 = chain_rngs(5, 1);
  EXPECT_EQ(conditional_step(m, y, std::span(&mask, 1), {0.01, 1, true}, r1),
            langevin_step(m, y, {0.01, 1, true}, r2));
}

TEST(Conditional, ObservedVoxelsUntouchedOverNinetySteps) {
  const DescriptorModel m = fixture::trained_toy_model();
  const Tensor y0 = batch(8, 2, 12);
  const std::vector<CorruptionMask> masks = {random_mask({8, 8, 8}, 1),
                                             random_mask({8, 8, 8}, 2)};
  auto rngs = chain_rngs(6, 2);
  const Tensor y = run_conditional_chain(m, y0, masks, {0.01, 90, true}, rngs);
  std::size_t moved = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t k = 0; k < 512; ++k) {
      const std::size_t at = i * 512 + k;
      if (!masks[i].is_free(k)) {
        EXPECT_EQ(y[at], y0[at]);
      } else if (y[at] != y0[at]) {
        ++moved;
      }
    }
  }
  EXPECT_GT(moved, 0u);
}

TEST(Projected, ScaleOneIsFrozen) {
  const DescriptorModel m(fixture::tiny_arch(8), 0.5, 2);
  const Tensor y = batch(8, 1, 13);
  auto rngs = chain_rngs(1, 1);
  EXPECT_EQ(projected_step(m, y, GridScaler(1), {0.01, 1, true}, rngs), y);
}

TEST(Projected, BlockConstantUpdateIsRemoved) {
  // With a zero model and noise off the update is -(Δτ/2s²)·Y, which is
  // block-constant for a block-constant Y.
  DescriptorModel m(fixture::tiny_arch(8), 0.5, 2);
  zero_params(m);
  const GridScaler scaler(2);
  const Tensor y = scaler.upscale(batch(4, 1, 14));
  std::vector<Rng> none;
  const Tensor out = projected_step(m, y, scaler, {0.01, 1, false}, none);
  for (std::size_t k = 0; k < y.size(); ++k) EXPECT_NEAR(out[k], y[k], 1e-7);
}

TEST(Projected, CoarseViewPreservedOverNinetySteps) {
  const DescriptorModel m = fixture::trained_toy_model();
  const GridScaler scaler(2);
  const Tensor y0 = batch(8, 2, 15);
  auto rngs = chain_rngs(7, 2);
  const Tensor y = run_projected_chain(m, y0, scaler, {0.01, 90, true}, rngs);
  const Tensor a = scaler.downscale(y0);
  const Tensor b = scaler.downscale(y);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-5);
  EXPECT_NE(y, y0);
}
