#include "vebm/training.hpp"

#include <cmath>
#include <numeric>

#include "json.hpp"
#include "vebm/data.hpp"

namespace vebm {
namespace {

enum SeedTag : std::uint64_t { kShuffle = 1, kChains, kMasks, kLatents, kInit };

}  // namespace

std::string_view chain_init_name(ChainInit c) {
  switch (c) {
    case ChainInit::kPersistentNoise: return "persistent-noise";
    case ChainInit::kData: return "data";
    case ChainInit::kGenerator: return "generator";
    case ChainInit::kCoarserGrid: return "coarser-grid";
  }
  return "persistent-noise";
}

std::optional<ChainInit> parse_chain_init(std::string_view name) {
  for (auto c : {ChainInit::kPersistentNoise, ChainInit::kData, ChainInit::kGenerator,
                 ChainInit::kCoarserGrid}) {
    if (chain_init_name(c) == name) return c;
  }
  return std::nullopt;
}

void TrainConfig::validate() const {
  langevin.validate();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (chains < 1) throw ConfigError("chains must be >= 1");
  if (!(corruption >= 0.0 && corruption <= 1.0)) {
    throw ConfigError("corruption must lie in [0, 1]");
  }
  if (scale_factor < 1) throw ConfigError("scale_factor must be >= 1");
  for (std::size_t f : ladder) {
    if (f < 1) throw ConfigError("ladder factors must be >= 1");
  }
  if (histogram_bins < 1) throw ConfigError("histogram_bins must be >= 1");
  for (const AdamConfig* a : {&adam, &generator_adam}) {
    if (!(a->learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
    if (!(a->beta1 >= 0.0 && a->beta1 < 1.0) || !(a->beta2 >= 0.0 && a->beta2 < 1.0)) {
      throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (!(a->epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  }
}

LangevinConfig langevin_at(const TrainConfig& cfg, std::size_t iteration) {
  LangevinConfig l = cfg.langevin;
  if (cfg.noise_off_after && iteration >= *cfg.noise_off_after) l.noise = false;
  return l;
}

std::string TrainDiagnostics::to_json() const {
  nlohmann::json j;
  j["iteration"] = iteration;
  if (grid) j["grid"] = *grid;
  j["value"] = value;
  j["mean_observed_energy"] = mean_observed_energy;
  j["mean_synthesized_energy"] = mean_synthesized_energy;
  j["grad_norm"] = grad_norm;
  if (recon_loss) j["recon_loss"] = *recon_loss;
  if (generator_grad_norm) j["generator_grad_norm"] = *generator_grad_norm;
  return j.dump();
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double gradient_norm(std::span<const Tensor> grads) {
  double acc = 0.0;
  for (const Tensor& g : grads) acc += squared_norm(g.data());
  return std::sqrt(acc);
}

std::vector<Tensor> mle_grad(const DescriptorModel& model, const Tensor& observed,
                             const Tensor& synthesized) {
  model.check_batch(observed);
  model.check_batch(synthesized);
  std::vector<Tensor> obs = score_grad_params(model, observed);
  const std::vector<Tensor> syn = score_grad_params(model, synthesized);
  const double a = 1.0 / static_cast<double>(observed.dim(0));
  const double b = 1.0 / static_cast<double>(synthesized.dim(0));
  for (std::size_t p = 0; p < obs.size(); ++p) {
    for (std::size_t k = 0; k < obs[p].size(); ++k) {
      obs[p][k] = static_cast<float>(a * obs[p][k] - b * syn[p][k]);
    }
  }
  return obs;
}

// ---------------------------------------------------------------------------

BatchSampler::BatchSampler(std::size_t dataset_size, std::uint64_t seed)
    : size_(dataset_size), seed_(seed) {
  if (size_ == 0) throw ConfigError("dataset is empty");
  reshuffle();
}

void BatchSampler::reshuffle() {
  order_.resize(size_);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  Rng rng(derive_seed(seed_, kShuffle, epoch_));
  for (std::size_t i = size_; i > 1; --i) std::swap(order_[i - 1], order_[rng.below(i)]);
}

std::vector<BatchSampler::Draw> BatchSampler::next(std::size_t count) {
  std::vector<Draw> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    if (cursor_ == size_) {
      ++epoch_;
      cursor_ = 0;
      reshuffle();
    }
    out.push_back({order_[cursor_++], epoch_});
  }
  return out;
}

void BatchSampler::restore(std::size_t epoch, std::size_t cursor) {
  if (cursor > size_) throw FormatError("batch sampler cursor beyond dataset size");
  epoch_ = epoch;
  cursor_ = cursor;
  reshuffle();
}

// ---------------------------------------------------------------------------

const Tensor& TrainerSnapshot::tensor(std::string_view name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw FormatError("checkpoint lacks tensor '" + std::string(name) + "'");
}

std::uint64_t TrainerSnapshot::counter(std::string_view name) const {
  auto it = counters.find(std::string(name));
  if (it == counters.end()) {
    throw FormatError("checkpoint lacks counter '" + std::string(name) + "'");
  }
  return it->second;
}

void append_params(TrainerSnapshot& s, const std::string& prefix, const ParamSet& p) {
  for (std::size_t i = 0; i < p.size(); ++i) s.tensors.emplace_back(prefix + p.name(i), p[i]);
}

void load_params(const TrainerSnapshot& s, const std::string& prefix, ParamSet& p) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Tensor& t = s.tensor(prefix + p.name(i));
    if (t.shape() != p[i].shape()) {
      throw FormatError("checkpoint tensor '" + prefix + p.name(i) + "' has shape " +
                        shape_string(t.shape()) + ", model expects " +
                        shape_string(p[i].shape()));
    }
    p[i] = t;
  }
}

void append_adam(TrainerSnapshot& s, const std::string& prefix, const AdamState& a) {
  s.counters[prefix + "step"] = a.step;
  for (std::size_t i = 0; i < a.first_moment.size(); ++i) {
    s.tensors.emplace_back(prefix + "m" + std::to_string(i), a.first_moment[i]);
    s.tensors.emplace_back(prefix + "v" + std::to_string(i), a.second_moment[i]);
  }
}

void load_adam(const TrainerSnapshot& s, const std::string& prefix, AdamState& a) {
  a.step = s.counter(prefix + "step");
  for (std::size_t i = 0; i < a.first_moment.size(); ++i) {
    const Tensor& m = s.tensor(prefix + "m" + std::to_string(i));
    const Tensor& v = s.tensor(prefix + "v" + std::to_string(i));
    if (m.shape() != a.first_moment[i].shape() || v.shape() != a.second_moment[i].shape()) {
      throw FormatError("checkpoint optimizer moment " + std::to_string(i) +
                        " does not match the model");
    }
    a.first_moment[i] = m;
    a.second_moment[i] = v;
  }
}

void Trainer::run(const DiagnosticsSink& sink) {
  while (iteration_ < cfg_.iterations) {
    for (const TrainDiagnostics& d : step()) {
      if (sink) sink(d);
    }
  }
}

namespace {

void require_data(const std::vector<VoxelGrid>& data, Extent3 grid) {
  if (data.empty()) throw ConfigError("dataset is empty");
  for (const VoxelGrid& g : data) {
    if (!(g.extents() == grid)) {
      throw ShapeError("dataset grid extents do not match the model grid");
    }
  }
}

Tensor gather(const std::vector<VoxelGrid>& data,
              const std::vector<BatchSampler::Draw>& draws) {
  std::vector<VoxelGrid> picked;
  picked.reserve(draws.size());
  for (const auto& d : draws) picked.push_back(data[d.index]);
  return stack(picked);
}

Tensor gaussian_batch(std::size_t count, Extent3 grid, double std, Rng& rng) {
  Tensor t({count, 1, grid.d, grid.h, grid.w});
  for (float& v : t.data()) v = static_cast<float>(std * rng.normal());
  return t;
}

// Fills in the energy fields, takes the ascent step and returns the record.
TrainDiagnostics learn(DescriptorModel& model, AdamState& adam, const Tensor& observed,
                       const Tensor& synthesized, std::size_t iteration, double lr) {
  TrainDiagnostics d;
  d.iteration = iteration;
  const std::vector<double> e_obs = energy(model, observed);
  const std::vector<double> e_syn = energy(model, synthesized);
  d.mean_observed_energy = mean_of(e_obs);
  d.mean_synthesized_energy = mean_of(e_syn);
  d.value = d.mean_synthesized_energy - d.mean_observed_energy;
  const std::vector<Tensor> grads = mle_grad(model, observed, synthesized);
  d.grad_norm = gradient_norm(grads);
  adam.config.learning_rate = lr;
  adam_step(model.params(), grads, adam);
  return d;
}

std::vector<Rng> iteration_rngs(std::uint64_t seed, std::size_t iteration, std::size_t count) {
  return chain_rngs(derive_seed(seed, kChains, iteration), count);
}

void snapshot_common(TrainerSnapshot& s, std::size_t iteration, const BatchSampler& sampler) {
  s.counters["iteration"] = iteration;
  s.counters["epoch"] = sampler.epoch();
  s.counters["cursor"] = sampler.cursor();
}

std::size_t restore_common(const TrainerSnapshot& s, BatchSampler& sampler) {
  sampler.restore(s.counter("epoch"), s.counter("cursor"));
  return s.counter("iteration");
}

}  // namespace

// ---------------------------------------------------------------------------

MleTrainer::MleTrainer(DescriptorModel model, std::vector<VoxelGrid> data, TrainConfig cfg)
    : Trainer(std::move(cfg)),
      model_(std::move(model)),
      data_(std::move(data)),
      sampler_(data_.empty() ? 1 : data_.size(), cfg_.seed),
      adam_(make_adam_state(model_.params(), cfg_.adam, Objective::kMaximize)) {
  require_data(data_, model_.grid());
  if (cfg_.chain_init != ChainInit::kPersistentNoise && cfg_.chain_init != ChainInit::kData) {
    throw ConfigError("MLE training supports persistent-noise or data chain init");
  }
  Rng rng(derive_seed(cfg_.seed, kInit, 0));
  chains_ = gaussian_batch(cfg_.chains, model_.grid(), model_.ref_std(), rng);
}

std::vector<TrainDiagnostics> MleTrainer::step() {
  const auto draws = sampler_.next(cfg_.batch_size);
  const Tensor observed = gather(data_, draws);
  if (cfg_.chain_init == ChainInit::kData) {
    const std::size_t per = observed.size() / observed.dim(0);
    for (std::size_t c = 0; c < cfg_.chains; ++c) {
      const std::size_t src = c % observed.dim(0);
      std::copy(observed.raw() + src * per, observed.raw() + (src + 1) * per,
                chains_.raw() + c * per);
    }
  }
  std::vector<Rng> rngs = iteration_rngs(cfg_.seed, iteration_, cfg_.chains);
  chains_ = run_chain(model_, chains_, langevin_at(cfg_, iteration_), rngs);
  TrainDiagnostics d = learn(model_, adam_, observed, chains_, iteration_,
                             learning_rate(cfg_.adam.learning_rate));
  ++iteration_;
  return {d};
}

TrainerSnapshot MleTrainer::snapshot() const {
  TrainerSnapshot s;
  snapshot_common(s, iteration_, sampler_);
  append_params(s, "theta/", model_.params());
  append_adam(s, "adam/", adam_);
  s.tensors.emplace_back("chains", chains_);
  return s;
}

void MleTrainer::restore(const TrainerSnapshot& s) {
  iteration_ = restore_common(s, sampler_);
  load_params(s, "theta/", model_.params());
  load_adam(s, "adam/", adam_);
  const Tensor& c = s.tensor("chains");
  if (c.shape() != chains_.shape()) throw FormatError("checkpoint chains do not match config");
  chains_ = c;
}

// ---------------------------------------------------------------------------

RecoveryTrainer::RecoveryTrainer(DescriptorModel model, std::vector<VoxelGrid> data,
                                 TrainConfig cfg)
    : Trainer(std::move(cfg)),
      model_(std::move(model)),
      data_(std::move(data)),
      sampler_(data_.empty() ? 1 : data_.size(), cfg_.seed),
      adam_(make_adam_state(model_.params(), cfg_.adam, Objective::kMaximize)) {
  require_data(data_, model_.grid());
}

std::pair<VoxelGrid, CorruptionMask> RecoveryTrainer::corruption(std::size_t index,
                                                                 std::size_t epoch) const {
  const std::size_t mask_epoch = cfg_.refresh_masks ? epoch : 0;
  Rng rng = Rng::stream(derive_seed(cfg_.seed, kMasks, mask_epoch), index);
  return corrupt(data_.at(index), cfg_.corruption, rng, model_.ref_std());
}

std::vector<TrainDiagnostics> RecoveryTrainer::step() {
  const auto draws = sampler_.next(cfg_.batch_size);
  const Tensor observed = gather(data_, draws);
  std::vector<VoxelGrid> corrupted;
  std::vector<CorruptionMask> masks;
  for (const auto& d : draws) {
    auto [grid, mask] = corruption(d.index, d.epoch);
    corrupted.push_back(std::move(grid));
    masks.push_back(std::move(mask));
  }
  std::vector<Rng> rngs = iteration_rngs(cfg_.seed, iteration_, draws.size());
  const Tensor synthesized = run_conditional_chain(
      model_, stack(corrupted), masks, langevin_at(cfg_, iteration_), rngs);
  TrainDiagnostics d = learn(model_, adam_, observed, synthesized, iteration_,
                             learning_rate(cfg_.adam.learning_rate));
  ++iteration_;
  return {d};
}

TrainerSnapshot RecoveryTrainer::snapshot() const {
  TrainerSnapshot s;
  snapshot_common(s, iteration_, sampler_);
  append_params(s, "theta/", model_.params());
  append_adam(s, "adam/", adam_);
  return s;
}

void RecoveryTrainer::restore(const TrainerSnapshot& s) {
  iteration_ = restore_common(s, sampler_);
  load_params(s, "theta/", model_.params());
  load_adam(s, "adam/", adam_);
}

// ---------------------------------------------------------------------------

SuperResTrainer::SuperResTrainer(DescriptorModel model, std::vector<VoxelGrid> data,
                                 TrainConfig cfg)
    : Trainer(std::move(cfg)),
      model_(std::move(model)),
      data_(std::move(data)),
      sampler_(data_.empty() ? 1 : data_.size(), cfg_.seed),
      adam_(make_adam_state(model_.params(), cfg_.adam, Objective::kMaximize)),
      scaler_(cfg_.scale_factor) {
  require_data(data_, model_.grid());
  const Extent3 g = model_.grid();
  if (g.d % cfg_.scale_factor || g.h % cfg_.scale_factor || g.w % cfg_.scale_factor) {
    throw ConfigError("grid is not divisible by the super-resolution factor");
  }
}

std::vector<TrainDiagnostics> SuperResTrainer::step() {
  const auto draws = sampler_.next(cfg_.batch_size);
  const Tensor observed = gather(data_, draws);
  const Tensor start = scaler_.upscale(scaler_.downscale(observed));
  std::vector<Rng> rngs = iteration_rngs(cfg_.seed, iteration_, draws.size());
  const Tensor synthesized =
      run_projected_chain(model_, start, scaler_, langevin_at(cfg_, iteration_), rngs);
  TrainDiagnostics d = learn(model_, adam_, observed, synthesized, iteration_,
                             learning_rate(cfg_.adam.learning_rate));
  ++iteration_;
  return {d};
}

TrainerSnapshot SuperResTrainer::snapshot() const {
  TrainerSnapshot s;
  snapshot_common(s, iteration_, sampler_);
  append_params(s, "theta/", model_.params());
  append_adam(s, "adam/", adam_);
  return s;
}

void SuperResTrainer::restore(const TrainerSnapshot& s) {
  iteration_ = restore_common(s, sampler_);
  load_params(s, "theta/", model_.params());
  load_adam(s, "adam/", adam_);
}

// ---------------------------------------------------------------------------

namespace {

void require_ladder(const std::vector<DescriptorModel>& models,
                    std::span<const std::size_t> ladder, Extent3 data_grid) {
  if (models.size() != ladder.size() || models.empty()) {
    throw ConfigError("multi-grid needs one model per ladder step (" +
                      std::to_string(ladder.size()) + " steps, " +
                      std::to_string(models.size()) + " models)");
  }
  std::size_t size = 1;
  for (std::size_t s = 0; s < ladder.size(); ++s) {
    size *= ladder[s];
    const Extent3 g = models[s].grid();
    if (g.d != size || g.h != size || g.w != size) {
      throw ConfigError("multi-grid model " + std::to_string(s + 1) + " expects " +
                        std::to_string(g.d) + "^3 but the ladder gives " +
                        std::to_string(size) + "^3");
    }
  }
  if (data_grid.d != size || data_grid.h != size || data_grid.w != size) {
    throw ConfigError("dataset grid does not match the finest ladder level");
  }
}

}  // namespace

MultiGridTrainer::MultiGridTrainer(std::vector<DescriptorModel> models,
                                   std::vector<VoxelGrid> data, TrainConfig cfg)
    : Trainer(std::move(cfg)),
      models_(std::move(models)),
      data_(std::move(data)),
      sampler_(data_.empty() ? 1 : data_.size(), cfg_.seed) {
  if (data_.empty()) throw ConfigError("dataset is empty");
  require_ladder(models_, cfg_.ladder, data_.front().extents());
  require_data(data_, data_.front().extents());
  for (const DescriptorModel& m : models_) {
    adams_.push_back(make_adam_state(m.params(), cfg_.adam, Objective::kMaximize));
  }
  std::vector<double> coarse;
  coarse.reserve(data_.size());
  for (const VoxelGrid& g : data_) coarse.push_back(g.mean());
  histogram_ = fit_histogram(coarse, cfg_.histogram_bins);
}

std::vector<TrainDiagnostics> MultiGridTrainer::step() {
  const auto draws = sampler_.next(cfg_.batch_size);
  const std::vector<Tensor> observed = build_pyramid(gather(data_, draws), cfg_.ladder);
  const LangevinConfig lc = langevin_at(cfg_, iteration_);
  // Grid 0 starts from the data's own 1³ version.
  Tensor previous = observed.front();
  std::vector<TrainDiagnostics> out;
  for (std::size_t s = 0; s < models_.size(); ++s) {
    const Tensor start = GridScaler(cfg_.ladder[s]).upscale(previous);
    std::vector<Rng> rngs = iteration_rngs(derive_seed(cfg_.seed, kChains, s + 1),
                                           iteration_, draws.size());
    previous = run_chain(models_[s], start, lc, rngs);
    TrainDiagnostics d = learn(models_[s], adams_[s], observed[s + 1], previous, iteration_,
                               learning_rate(cfg_.adam.learning_rate));
    d.grid = s + 1;
    out.push_back(d);
  }
  ++iteration_;
  return out;
}

TrainerSnapshot MultiGridTrainer::snapshot() const {
  TrainerSnapshot s;
  snapshot_common(s, iteration_, sampler_);
  s.counters["grids"] = models_.size();
  for (std::size_t g = 0; g < models_.size(); ++g) {
    const std::string tag = std::to_string(g + 1);
    append_params(s, "theta" + tag + "/", models_[g].params());
    append_adam(s, "adam" + tag + "/", adams_[g]);
  }
  s.reals["histogram/edges"] = histogram_.edges;
  s.reals["histogram/probabilities"] = histogram_.probabilities;
  return s;
}

void MultiGridTrainer::restore(const TrainerSnapshot& s) {
  if (s.counter("grids") != models_.size()) {
    throw FormatError("checkpoint holds " + std::to_string(s.counter("grids")) +
                      " grids, config has " + std::to_string(models_.size()));
  }
  iteration_ = restore_common(s, sampler_);
  for (std::size_t g = 0; g < models_.size(); ++g) {
    const std::string tag = std::to_string(g + 1);
    load_params(s, "theta" + tag + "/", models_[g].params());
    load_adam(s, "adam" + tag + "/", adams_[g]);
  }
  auto edges = s.reals.find("histogram/edges");
  auto probs = s.reals.find("histogram/probabilities");
  if (edges == s.reals.end() || probs == s.reals.end()) {
    throw FormatError("checkpoint lacks the grid-0 histogram");
  }
  histogram_ = {edges->second, probs->second};
}

// ---------------------------------------------------------------------------

CoopTrainer::CoopTrainer(DescriptorModel descriptor, GeneratorModel generator,
                         std::vector<VoxelGrid> data, TrainConfig cfg)
    : Trainer(std::move(cfg)),
      descriptor_(std::move(descriptor)),
      generator_(std::move(generator)),
      data_(std::move(data)),
      sampler_(data_.empty() ? 1 : data_.size(), cfg_.seed),
      descriptor_adam_(make_adam_state(descriptor_.params(), cfg_.adam, Objective::kMaximize)),
      generator_adam_(
          make_adam_state(generator_.params(), cfg_.generator_adam, Objective::kMinimize)) {
  require_data(data_, descriptor_.grid());
  if (!(generator_.grid() == descriptor_.grid())) {
    throw ConfigError("generator output grid differs from the descriptor grid");
  }
  if (cfg_.chains < 2) throw ConfigError("cooperative training needs >= 2 chains (batchnorm)");
}

std::vector<TrainDiagnostics> CoopTrainer::step() {
  Rng latent_rng(derive_seed(cfg_.seed, kLatents, iteration_));
  const Tensor z = sample_prior_batch(cfg_.chains, generator_.latent_dim(), latent_rng);
  Tensor proposal = generator_.generate_training(z);
  if (cfg_.generator_noise) {
    for (float& v : proposal.data()) {
      v = static_cast<float>(v + generator_.noise_std() * latent_rng.normal());
    }
  }
  std::vector<Rng> rngs = iteration_rngs(cfg_.seed, iteration_, cfg_.chains);
  revised_ = run_chain(descriptor_, proposal, langevin_at(cfg_, iteration_), rngs);

  const Tensor observed = gather(data_, sampler_.next(cfg_.batch_size));
  TrainDiagnostics d = learn(descriptor_, descriptor_adam_, observed, revised_, iteration_,
                             learning_rate(cfg_.adam.learning_rate));

  GeneratorModel::RegressionResult r = generator_.regression_grad(z, revised_);
  d.recon_loss = r.loss;
  d.generator_grad_norm = gradient_norm(r.grads);
  generator_adam_.config.learning_rate = learning_rate(cfg_.generator_adam.learning_rate);
  adam_step(generator_.params(), r.grads, generator_adam_);
  ++iteration_;
  return {d};
}

TrainerSnapshot CoopTrainer::snapshot() const {
  TrainerSnapshot s;
  snapshot_common(s, iteration_, sampler_);
  append_params(s, "theta/", descriptor_.params());
  append_adam(s, "adam/", descriptor_adam_);
  append_params(s, "alpha/", generator_.params());
  append_params(s, "alpha_stats/", generator_.buffers());
  append_adam(s, "gen_adam/", generator_adam_);
  return s;
}

void CoopTrainer::restore(const TrainerSnapshot& s) {
  iteration_ = restore_common(s, sampler_);
  load_params(s, "theta/", descriptor_.params());
  load_adam(s, "adam/", descriptor_adam_);
  load_params(s, "alpha/", generator_.params());
  load_params(s, "alpha_stats/", generator_.buffers());
  load_adam(s, "gen_adam/", generator_adam_);
}

// ---------------------------------------------------------------------------

VoxelGrid recover(const DescriptorModel& model, const VoxelGrid& corrupted,
                  const CorruptionMask& mask, const LangevinConfig& cfg, Rng& rng) {
  std::span<Rng> rngs(&rng, 1);
  const Tensor out = run_conditional_chain(model, corrupted.as_batch(),
                                           std::span<const CorruptionMask>(&mask, 1), cfg,
                                           rngs);
  return unstack(out, 0);
}

VoxelGrid superres(const DescriptorModel& model, const VoxelGrid& low,
                   const GridScaler& scaler, const LangevinConfig& cfg, Rng& rng) {
  std::span<Rng> rngs(&rng, 1);
  const Tensor start = scaler.upscale(low.as_batch());
  if (scaler.factor() == 1) return unstack(start, 0);
  return unstack(run_projected_chain(model, start, scaler, cfg, rngs), 0);
}

Tensor synthesize(const DescriptorModel& model, std::size_t count,
                  const LangevinConfig& cfg, std::uint64_t seed) {
  Rng init(derive_seed(seed, kInit, 0));
  const Tensor start = gaussian_batch(count, model.grid(), model.ref_std(), init);
  std::vector<Rng> rngs = chain_rngs(derive_seed(seed, kChains, 0), count);
  return run_chain(model, start, cfg, rngs);
}

std::vector<GridPyramid> sample_multigrid(const std::vector<DescriptorModel>& models,
                                          const HistogramModel& histogram,
                                          std::span<const std::size_t> ladder,
                                          const LangevinConfig& cfg, std::size_t count,
                                          std::uint64_t seed) {
  std::size_t finest = 1;
  for (std::size_t f : ladder) finest *= f;
  require_ladder(models, ladder, {finest, finest, finest});
  std::vector<GridPyramid> out(count);
  if (count == 0) return out;
  Rng hist_rng(derive_seed(seed, kInit, 0));
  Tensor level({count, 1, 1, 1, 1});
  for (std::size_t i = 0; i < count; ++i) {
    level[i] = static_cast<float>(sample_histogram_value(histogram, hist_rng));
  }
  auto record = [&](const Tensor& t) {
    for (std::size_t i = 0; i < count; ++i) out[i].levels.push_back(unstack(t, i));
  };
  record(level);
  for (std::size_t s = 0; s < models.size(); ++s) {
    std::vector<Rng> rngs =
        chain_rngs(derive_seed(derive_seed(seed, kChains, s + 1), kChains, 0), count);
    level = run_chain(models[s], GridScaler(ladder[s]).upscale(level), cfg, rngs);
    record(level);
  }
  return out;
}

}  // namespace vebm
