#pragma once

// Analysis-by-synthesis trainers. Every trainer is a resumable state machine:
// step() runs one iteration (sampling, then the parameter update), and
// snapshot()/restore() capture everything needed to continue bit-identically.
//
// Per-iteration random streams are derived from (seed, iteration) and
// per-epoch shuffles and corruption masks from (seed, epoch), so the only
// random state carried between iterations is the persistent chains.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vebm/adam.hpp"
#include "vebm/energy_model.hpp"
#include "vebm/generator.hpp"
#include "vebm/grid_ops.hpp"
#include "vebm/langevin.hpp"
#include "vebm/voxel.hpp"

namespace vebm {

enum class ChainInit { kPersistentNoise, kData, kGenerator, kCoarserGrid };

std::string_view chain_init_name(ChainInit c);
std::optional<ChainInit> parse_chain_init(std::string_view name);

struct TrainConfig {
  std::size_t iterations = 0;  // total, counted from iteration 0
  std::size_t batch_size = 8;
  std::size_t chains = 8;
  LangevinConfig langevin;
  /// Langevin noise is switched off from this iteration on; nullopt keeps it.
  std::optional<std::size_t> noise_off_after = 100;
  AdamConfig adam;
  ChainInit chain_init = ChainInit::kPersistentNoise;
  std::uint64_t seed = 0;

  // Recovery.
  double corruption = 0.7;
  bool refresh_masks = true;
  // Super-resolution.
  std::size_t scale_factor = 2;
  // Multi-grid: ratio between consecutive levels, coarsest first.
  std::vector<std::size_t> ladder = {4, 2, 2};
  std::size_t histogram_bins = 32;
  // Cooperative.
  AdamConfig generator_adam{0.0003, 0.6, 0.999, 1e-8};
  bool generator_noise = true;

  /// Throws ConfigError on invalid values.
  void validate() const;
};

/// Langevin settings in effect at `iteration` (noise schedule applied).
LangevinConfig langevin_at(const TrainConfig& cfg, std::size_t iteration);

struct TrainDiagnostics {
  std::size_t iteration = 0;
  std::optional<std::size_t> grid;  // multi-grid level
  double value = 0.0;               // mean E(synthesized) - mean E(observed)
  double mean_observed_energy = 0.0;
  double mean_synthesized_energy = 0.0;
  double grad_norm = 0.0;
  std::optional<double> recon_loss;  // generator regression loss
  std::optional<double> generator_grad_norm;

  /// One-line JSON object.
  std::string to_json() const;
};

using DiagnosticsSink = std::function<void(const TrainDiagnostics&)>;
/// Learning rate for `iteration` given the configured base rate.
using LearningRateSchedule = std::function<double(std::size_t iteration, double base)>;

/// (1/n) Σ ∂f(Y_i)/∂θ - (1/ñ) Σ ∂f(Ỹ_i)/∂θ, the ascent direction of the
/// log-likelihood and the gradient of the value function.
std::vector<Tensor> mle_grad(const DescriptorModel& model, const Tensor& observed,
                             const Tensor& synthesized);

double mean_of(std::span<const double> values);
double gradient_norm(std::span<const Tensor> grads);

/// Seeded per-epoch shuffling. Each epoch's order is a function of
/// (seed, epoch) alone.
class BatchSampler {
 public:
  BatchSampler(std::size_t dataset_size, std::uint64_t seed);

  struct Draw {
    std::size_t index;
    std::size_t epoch;
  };
  std::vector<Draw> next(std::size_t count);

  std::size_t epoch() const { return epoch_; }
  std::size_t cursor() const { return cursor_; }
  void restore(std::size_t epoch, std::size_t cursor);

 private:
  void reshuffle();

  std::size_t size_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> order_;
};

/// Integer counters, real vectors and tensors that make up a trainer state.
struct TrainerSnapshot {
  std::map<std::string, std::uint64_t> counters;
  std::map<std::string, std::vector<double>> reals;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(std::string_view name) const;
  std::uint64_t counter(std::string_view name) const;
};

void append_params(TrainerSnapshot& s, const std::string& prefix, const ParamSet& p);
void load_params(const TrainerSnapshot& s, const std::string& prefix, ParamSet& p);
void append_adam(TrainerSnapshot& s, const std::string& prefix, const AdamState& a);
void load_adam(const TrainerSnapshot& s, const std::string& prefix, AdamState& a);

/// Shared driver: calls step() until the configured iteration count.
class Trainer {
 public:
  virtual ~Trainer() = default;
  /// One iteration; returns one record (several for multi-grid).
  virtual std::vector<TrainDiagnostics> step() = 0;
  virtual TrainerSnapshot snapshot() const = 0;
  virtual void restore(const TrainerSnapshot& s) = 0;

  std::size_t iteration() const { return iteration_; }
  const TrainConfig& config() const { return cfg_; }
  void set_iterations(std::size_t total) { cfg_.iterations = total; }
  void set_learning_rate_schedule(LearningRateSchedule s) { schedule_ = std::move(s); }
  /// Steps until iteration() == config().iterations.
  void run(const DiagnosticsSink& sink = {});

 protected:
  explicit Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }
  double learning_rate(double base) const {
    return schedule_ ? schedule_(iteration_, base) : base;
  }

  TrainConfig cfg_;
  std::size_t iteration_ = 0;
  LearningRateSchedule schedule_;
};

/// Persistent chains (or data-initialised chains) and Adam ascent.
class MleTrainer : public Trainer {
 public:
  MleTrainer(DescriptorModel model, std::vector<VoxelGrid> data, TrainConfig cfg);

  std::vector<TrainDiagnostics> step() override;
  TrainerSnapshot snapshot() const override;
  void restore(const TrainerSnapshot& s) override;

  const DescriptorModel& model() const { return model_; }
  DescriptorModel& model() { return model_; }
  const Tensor& chains() const { return chains_; }
  const AdamState& adam() const { return adam_; }

 private:
  DescriptorModel model_;
  std::vector<VoxelGrid> data_;
  BatchSampler sampler_;
  AdamState adam_;
  Tensor chains_;
};

/// Chains start from corrupted examples; observed voxels stay clamped.
class RecoveryTrainer : public Trainer {
 public:
  RecoveryTrainer(DescriptorModel model, std::vector<VoxelGrid> data, TrainConfig cfg);

  std::vector<TrainDiagnostics> step() override;
  TrainerSnapshot snapshot() const override;
  void restore(const TrainerSnapshot& s) override;

  const DescriptorModel& model() const { return model_; }
  DescriptorModel& model() { return model_; }
  const AdamState& adam() const { return adam_; }
  /// Corrupted copy and mask of example `index` during `epoch`.
  std::pair<VoxelGrid, CorruptionMask> corruption(std::size_t index, std::size_t epoch) const;

 private:
  DescriptorModel model_;
  std::vector<VoxelGrid> data_;
  BatchSampler sampler_;
  AdamState adam_;
};

/// Chains start at C⁻C·Y and move only inside the null space of C.
class SuperResTrainer : public Trainer {
 public:
  SuperResTrainer(DescriptorModel model, std::vector<VoxelGrid> data, TrainConfig cfg);

  std::vector<TrainDiagnostics> step() override;
  TrainerSnapshot snapshot() const override;
  void restore(const TrainerSnapshot& s) override;

  const DescriptorModel& model() const { return model_; }
  DescriptorModel& model() { return model_; }
  const AdamState& adam() const { return adam_; }

 private:
  DescriptorModel model_;
  std::vector<VoxelGrid> data_;
  BatchSampler sampler_;
  AdamState adam_;
  GridScaler scaler_;
};

/// One descriptor per grid above 1³; the chain at grid s starts from
/// the up-scaled chain of grid s-1 and grid 0 is the data's own 1³ version.
class MultiGridTrainer : public Trainer {
 public:
  /// `models[s]` describes level s + 1 of the ladder in `cfg.ladder`.
  MultiGridTrainer(std::vector<DescriptorModel> models, std::vector<VoxelGrid> data,
                   TrainConfig cfg);

  std::vector<TrainDiagnostics> step() override;
  TrainerSnapshot snapshot() const override;
  void restore(const TrainerSnapshot& s) override;

  const std::vector<DescriptorModel>& models() const { return models_; }
  std::vector<DescriptorModel>& models() { return models_; }
  const HistogramModel& histogram() const { return histogram_; }

 private:
  std::vector<DescriptorModel> models_;
  std::vector<VoxelGrid> data_;
  BatchSampler sampler_;
  std::vector<AdamState> adams_;
  HistogramModel histogram_;
};

/// The generator proposes, Langevin revises, the descriptor learns
/// from the revision and the generator regresses onto it with known latents.
class CoopTrainer : public Trainer {
 public:
  CoopTrainer(DescriptorModel descriptor, GeneratorModel generator,
              std::vector<VoxelGrid> data, TrainConfig cfg);

  std::vector<TrainDiagnostics> step() override;
  TrainerSnapshot snapshot() const override;
  void restore(const TrainerSnapshot& s) override;

  const DescriptorModel& descriptor() const { return descriptor_; }
  DescriptorModel& descriptor() { return descriptor_; }
  const GeneratorModel& generator() const { return generator_; }
  GeneratorModel& generator() { return generator_; }
  /// The latest revised samples Ỹ.
  const Tensor& revised() const { return revised_; }

 private:
  DescriptorModel descriptor_;
  GeneratorModel generator_;
  std::vector<VoxelGrid> data_;
  BatchSampler sampler_;
  AdamState descriptor_adam_;
  AdamState generator_adam_;
  Tensor revised_;
};

/// Samples from p(Y_M | Y_M̃): conditional chain from the corrupted grid.
VoxelGrid recover(const DescriptorModel& model, const VoxelGrid& corrupted,
                  const CorruptionMask& mask, const LangevinConfig& cfg, Rng& rng);

/// Projected chain from C⁻·Y_low; the result down-scales back to Y_low.
VoxelGrid superres(const DescriptorModel& model, const VoxelGrid& low,
                   const GridScaler& scaler, const LangevinConfig& cfg, Rng& rng);

/// Unconditional synthesis: `count` chains from N(0, s²) noise, K steps each.
Tensor synthesize(const DescriptorModel& model, std::size_t count,
                  const LangevinConfig& cfg, std::uint64_t seed);

/// Coarse-to-fine sampling: grid 0 from the histogram, then up-scale and run
/// K steps at every level. One pyramid per sample.
std::vector<GridPyramid> sample_multigrid(const std::vector<DescriptorModel>& models,
                                          const HistogramModel& histogram,
                                          std::span<const std::size_t> ladder,
                                          const LangevinConfig& cfg, std::size_t count,
                                          std::uint64_t seed);

}  // namespace vebm
