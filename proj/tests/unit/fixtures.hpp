#pragma once

// Small models and datasets shared by several test files.

#include <vector>

#include "vebm/data.hpp"
#include "vebm/energy_model.hpp"
#include "vebm/training.hpp"

namespace fixture {

inline vebm::DescriptorArchitecture tiny_arch(std::size_t n) {
  using vebm::LayerSpec;
  return {{LayerSpec::conv(4, 3, 2), LayerSpec::relu(), LayerSpec::fc(1, false)}, {n, n, n}};
}

/// Mean-subtracted boxes on an n³ grid.
inline vebm::Dataset boxes(std::size_t count, std::size_t n, std::uint64_t seed) {
  return vebm::preprocess(vebm::gen_procedural("box", count, n, seed));
}

/// A tiny descriptor after a few dozen MLE iterations on 8³ boxes.
inline vebm::DescriptorModel trained_toy_model(std::size_t iterations = 30) {
  const vebm::Dataset data = boxes(6, 8, 3);
  vebm::TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.batch_size = 6;
  cfg.chains = 6;
  cfg.langevin = {0.01, 10, true};
  cfg.noise_off_after = std::nullopt;
  cfg.adam.learning_rate = 0.01;
  cfg.seed = 4;
  vebm::MleTrainer t(vebm::DescriptorModel(tiny_arch(8), 0.5, 5), data.grids, cfg);
  t.run();
  return t.model();
}

}  // namespace fixture
