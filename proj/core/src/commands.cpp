#include "vebm/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>

#include <omp.h>

#include "json.hpp"

#include "vebm/errors.hpp"
#include "vebm/eval.hpp"
#include "vebm/grid_ops.hpp"
#include "vebm/langevin.hpp"

namespace vebm {

namespace fs = std::filesystem;

namespace {

// Seed tags for command-level streams, disjoint from the trainers' tags.
enum CommandTag : std::uint64_t { kSampleLatents = 101, kSampleChains, kOutputMasks, kEvalMasks };

std::string file_name(const char* stem, std::size_t i, const char* ext = ".vgrid") {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu%s", stem, i, ext);
  return buf;
}

fs::path require_out(const CommandOptions& opts, const std::string& command) {
  if (!opts.out) throw ConfigError(command + " needs --out");
  return *opts.out;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

/// Binary grid to the values the models see.
VoxelGrid to_model_values(const VoxelGrid& binary, ValueConvention convention, double mean) {
  VoxelGrid g = binary;
  for (float& v : g.values()) {
    v = convention == ValueConvention::kSignedUnit ? 2.0f * v - 1.0f
                                                   : static_cast<float>(v - mean);
  }
  return g;
}

std::vector<VoxelGrid> to_binary(const Tensor& batch, ValueConvention convention, double mean) {
  std::vector<VoxelGrid> out;
  for (const auto& g : unstack_all(batch)) out.push_back(postprocess(g, convention, mean));
  return out;
}

double voxel_error(const VoxelGrid& a, const VoxelGrid& b) {
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += a.values()[i] != b.values()[i];
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

void check_grid(const Dataset& data, Extent3 expected, const std::string& what) {
  if (data.size() == 0) throw ConfigError(what + " is empty");
  data.check_extents();
  const Extent3 e = data.grids.front().extents();
  if (!(e == expected)) {
    throw ConfigError(what + " holds " + std::to_string(e.d) + "x" + std::to_string(e.h) + "x" +
                      std::to_string(e.w) + " grids, the model expects " +
                      std::to_string(expected.d) + "x" + std::to_string(expected.h) + "x" +
                      std::to_string(expected.w));
  }
}

Extent3 finest_grid(const RunConfig& cfg) {
  return cfg.mode == RunMode::kMultiGrid ? cfg.grid_descriptors.back().grid
                                         : cfg.descriptor.grid;
}

// ---------------------------------------------------------------------------
// Models rebuilt from a checkpoint.

DescriptorModel descriptor_from(const Checkpoint& ckpt, const DescriptorArchitecture& arch,
                                const std::string& prefix) {
  DescriptorModel m(arch, ckpt.config.ref_std, ckpt.config.init_seed);
  load_params(ckpt.state, prefix, m.params());
  return m;
}

/// The descriptor acting on the finest grid.
DescriptorModel main_descriptor(const Checkpoint& ckpt) {
  const RunConfig& cfg = ckpt.config;
  if (cfg.mode == RunMode::kMultiGrid) {
    return descriptor_from(ckpt, cfg.grid_descriptors.back(),
                           "theta" + std::to_string(cfg.grid_descriptors.size()) + "/");
  }
  return descriptor_from(ckpt, cfg.descriptor, "theta/");
}

const std::vector<double>& real_vector(const Checkpoint& ckpt, const std::string& name) {
  auto it = ckpt.state.reals.find(name);
  if (it == ckpt.state.reals.end()) throw FormatError("checkpoint lacks '" + name + "'");
  return it->second;
}

// ---------------------------------------------------------------------------

struct LoadedConfig {
  RunConfig cfg;
  std::optional<Checkpoint> resume;
};

LoadedConfig resolve_config(const CommandOptions& opts, const std::string& command) {
  LoadedConfig lc;
  if (opts.checkpoint) lc.resume = load_checkpoint(*opts.checkpoint);
  if (opts.config && opts.preset) throw ConfigError("--config and --preset are exclusive");
  if (opts.config) {
    lc.cfg = load_run_config(*opts.config);
  } else if (opts.preset) {
    lc.cfg = preset_config(*opts.preset);
  } else if (lc.resume) {
    lc.cfg = lc.resume->config;
  } else {
    throw ConfigError(command + " needs --config, --preset or --checkpoint");
  }
  if (opts.seed) lc.cfg.train.seed = *opts.seed;
  if (opts.iterations) lc.cfg.train.iterations = *opts.iterations;
  if (opts.count) lc.cfg.output_count = *opts.count;
  lc.cfg.validate();
  return lc;
}

void require_mode(RunMode actual, const std::string& command, const char* what) {
  if (run_mode_name(actual) != command) {
    throw ConfigError(std::string(what) + " mode '" + std::string(run_mode_name(actual)) +
                      "' does not match command '" + command + "'");
  }
}

// Per-mode artifacts written after training.
void write_training_outputs(const RunConfig& cfg, const Checkpoint& ckpt,
                            const Dataset& model_space, const fs::path& dir,
                            std::ostream& out) {
  const fs::path samples = dir / "samples";
  make_dir(samples);
  const std::size_t count = cfg.output_count;
  const std::uint64_t seed = cfg.train.seed;
  switch (cfg.mode) {
    case RunMode::kTrain:
    case RunMode::kMultiGrid:
    case RunMode::kCoop: {
      const auto grids = sample_checkpoint(ckpt, count, seed);
      for (std::size_t i = 0; i < grids.size(); ++i) {
        save_grid(samples / file_name("sample", i), grids[i]);
      }
      out << "wrote " << grids.size() << " samples to " << samples.string() << "\n";
      break;
    }
    case RunMode::kRecover: {
      const DescriptorModel model = main_descriptor(ckpt);
      const std::size_t n = std::min(count, model_space.size());
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        Rng mask_rng = Rng::stream(derive_seed(seed, kOutputMasks, 0), i);
        auto [corrupted, mask] =
            corrupt(model_space.grids[i], cfg.train.corruption, mask_rng, cfg.ref_std);
        Rng chain = Rng::stream(derive_seed(seed, kSampleChains, 0), i);
        const VoxelGrid recovered = recover(model, corrupted, mask, cfg.sampling, chain);
        const VoxelGrid original = postprocess(model_space.grids[i], cfg.convention, ckpt.data_mean);
        const VoxelGrid result = postprocess(recovered, cfg.convention, ckpt.data_mean);
        save_grid(samples / file_name("original", i), original);
        save_grid(samples / file_name("corrupted", i), corrupted);
        save_grid(samples / file_name("recovered", i), result);
        err += recovery_error(original, result, mask);
      }
      out << "wrote " << n << " recoveries to " << samples.string();
      if (n > 0) out << ", mean recovery error " << err / static_cast<double>(n);
      out << "\n";
      break;
    }
    case RunMode::kSuperRes: {
      const DescriptorModel model = main_descriptor(ckpt);
      const GridScaler scaler(cfg.train.scale_factor);
      const std::size_t n = std::min(count, model_space.size());
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const VoxelGrid low = scaler.downscale(model_space.grids[i]);
        Rng chain = Rng::stream(derive_seed(seed, kSampleChains, 0), i);
        const VoxelGrid high = superres(model, low, scaler, cfg.sampling, chain);
        const VoxelGrid original = postprocess(model_space.grids[i], cfg.convention, ckpt.data_mean);
        const VoxelGrid result = postprocess(high, cfg.convention, ckpt.data_mean);
        save_grid(samples / file_name("original", i), original);
        save_grid(samples / file_name("low", i), postprocess(low, cfg.convention, ckpt.data_mean));
        save_grid(samples / file_name("superres", i), result);
        err += voxel_error(original, result);
      }
      out << "wrote " << n << " super-resolved grids to " << samples.string();
      if (n > 0) out << ", mean voxel error " << err / static_cast<double>(n);
      out << "\n";
      break;
    }
  }
}

int cmd_train(const std::string& command, const CommandOptions& opts, std::ostream& out) {
  LoadedConfig lc = resolve_config(opts, command);
  const RunConfig& cfg = lc.cfg;
  require_mode(cfg.mode, command, "config");
  if (lc.resume) require_mode(lc.resume->config.mode, command, "checkpoint");
  const fs::path dir = require_out(opts, command);
  OutputLock lock(dir);

  const Dataset model_space = to_model_space(load_run_data(cfg), cfg.convention);
  check_grid(model_space, finest_grid(cfg), "training data");
  std::unique_ptr<Trainer> trainer = make_trainer(cfg, model_space);
  if (lc.resume) {
    trainer->restore(lc.resume->state);
    if (trainer->iteration() > cfg.train.iterations) {
      throw ConfigError("checkpoint is at iteration " + std::to_string(trainer->iteration()) +
                        ", beyond the requested " + std::to_string(cfg.train.iterations));
    }
  }

  const fs::path log_path = dir / "diagnostics.jsonl";
  std::ofstream log(log_path, lc.resume ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write '" + log_path.string() + "'");
  const std::size_t total = cfg.train.iterations;
  const std::size_t every = std::max<std::size_t>(1, total / 10);
  trainer->run([&](const TrainDiagnostics& d) {
    log << d.to_json() << "\n";
    log.flush();
    if (!log) throw IoError("write failed for '" + log_path.string() + "'");
    if ((d.iteration + 1) % every == 0 || d.iteration + 1 == total) {
      out << command << " iteration " << d.iteration + 1 << "/" << total;
      if (d.grid) out << "  grid " << *d.grid;
      out << "  value " << d.value << "\n";
    }
  });

  const Checkpoint ckpt = make_checkpoint(cfg, model_space.mean, *trainer);
  save_checkpoint(dir / "checkpoint.vebm", ckpt);
  out << "checkpoint at iteration " << trainer->iteration() << " written to "
      << (dir / "checkpoint.vebm").string() << "\n";
  write_training_outputs(cfg, ckpt, model_space, dir, out);
  return kExitOk;
}

int cmd_sample(const CommandOptions& opts, std::ostream& out) {
  if (!opts.checkpoint) throw ConfigError("sample needs --checkpoint");
  const Checkpoint ckpt = load_checkpoint(*opts.checkpoint);
  const fs::path dir = require_out(opts, "sample");
  const std::size_t count = opts.count.value_or(ckpt.config.output_count);
  const std::uint64_t seed = opts.seed.value_or(0);
  const auto grids = sample_checkpoint(ckpt, count, seed);  // validates the mode first
  OutputLock lock(dir);
  for (std::size_t i = 0; i < grids.size(); ++i) {
    save_grid(dir / file_name("sample", i), grids[i]);
    if (opts.write_obj) write_file(dir / file_name("sample", i, ".obj"), export_obj(grids[i], 0.5));
  }
  out << "wrote " << grids.size() << " samples to " << dir.string() << "\n";
  return kExitOk;
}

std::vector<VoxelGrid> load_grid_dir(const fs::path& dir) {
  if (fs::exists(dir / "labels.json")) return load_dataset(dir).grids;
  if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".vgrid") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<VoxelGrid> grids;
  for (const auto& f : files) grids.push_back(load_grid(f));
  return grids;
}

int cmd_eval(const CommandOptions& opts, std::ostream& out) {
  if (!opts.checkpoint) throw ConfigError("eval needs --checkpoint");
  if (opts.metrics.empty()) throw ConfigError("eval needs --metrics");
  const auto known = metric_names();
  std::map<std::string, bool> want;
  for (const auto& m : opts.metrics) {
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      throw ConfigError("unknown metric '" + m + "'");
    }
    want[m] = true;
  }
  const bool needs_classifier =
      want.count("inception_score") || want.count("softmax_prob") || want.count("classification_error");
  const bool needs_synthetic = needs_classifier || want.count("fid");

  const Checkpoint ckpt = load_checkpoint(*opts.checkpoint);
  const RunConfig& cfg = ckpt.config;
  const std::uint64_t seed = opts.seed.value_or(0);
  const DescriptorModel model = main_descriptor(ckpt);

  Dataset real = opts.data ? load_dataset(*opts.data) : load_run_data(cfg);
  if (real.convention != ValueConvention::kBinary01) {
    throw ConfigError("eval needs a binary dataset, found '" +
                      std::string(convention_name(real.convention)) + "'");
  }
  check_grid(real, model.grid(), "real set");

  std::vector<VoxelGrid> synthetic;
  if (needs_synthetic) {
    if (opts.samples) {
      synthetic = load_grid_dir(*opts.samples);
    } else {
      synthetic = sample_checkpoint(ckpt, opts.count.value_or(16), seed);
    }
    if (synthetic.empty()) throw ConfigError("synthetic set is empty");
    for (const auto& g : synthetic) {
      if (!(g.extents() == model.grid())) throw ConfigError("synthetic grids do not match the model grid");
    }
  }

  auto features_of = [&](const std::vector<VoxelGrid>& grids) {
    std::vector<VoxelGrid> values;
    for (const auto& g : grids) values.push_back(to_model_values(g, cfg.convention, ckpt.data_mean));
    return extract_features(model, stack(values));
  };

  EvalReport report;
  Matrix real_features, syn_features;
  if (needs_synthetic) {
    real_features = features_of(real.grids);
    syn_features = features_of(synthetic);
  }
  if (want.count("fid")) report.fid = fid(real_features, syn_features);
  if (needs_classifier) {
    const auto cats = real.categories();
    if (cats.size() < 2) throw ConfigError("classifier metrics need at least 2 real categories");
    const auto labels = real.label_ids();
    const ClassifierModel clf = train_classifier(real_features, labels);
    if (want.count("inception_score")) {
      Matrix probs;
      for (const auto& f : syn_features) probs.push_back(classify(clf, f).probabilities);
      report.inception_score = inception_score(probs);
    }
    if (want.count("softmax_prob") || want.count("classification_error")) {
      if (!opts.target) throw ConfigError("softmax_prob and classification_error need --target");
      auto it = std::find(cats.begin(), cats.end(), *opts.target);
      if (it == cats.end()) throw ConfigError("target category '" + *opts.target + "' is not in the real set");
      const auto target = static_cast<std::size_t>(it - cats.begin());
      if (want.count("softmax_prob")) report.softmax_prob = softmax_class_prob(clf, syn_features, target);
      if (want.count("classification_error")) {
        report.classification_error = classification_error(clf, syn_features, target);
      }
    }
  }
  if (want.count("recovery_error")) {
    const std::size_t n = opts.count ? std::min(*opts.count, real.size()) : real.size();
    if (n == 0) throw ConfigError("recovery_error needs at least one real shape");
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const VoxelGrid values = to_model_values(real.grids[i], cfg.convention, ckpt.data_mean);
      Rng mask_rng = Rng::stream(derive_seed(seed, kEvalMasks, 0), i);
      auto [corrupted, mask] = corrupt(values, cfg.train.corruption, mask_rng, cfg.ref_std);
      Rng chain = Rng::stream(derive_seed(seed, kSampleChains, 0), i);
      const VoxelGrid rec =
          postprocess(recover(model, corrupted, mask, cfg.sampling, chain), cfg.convention, ckpt.data_mean);
      err += recovery_error(real.grids[i], rec, mask);
    }
    report.recovery_error = err / static_cast<double>(n);
  }

  const std::string json = report.to_json();
  if (opts.out) {
    OutputLock lock(*opts.out);
    write_file(*opts.out / "report.json", json + "\n");
  }
  out << json << "\n";
  return kExitOk;
}

int cmd_dataset(const CommandOptions& opts, std::ostream& out) {
  const fs::path dir = require_out(opts, "dataset");
  std::vector<std::string> cats = opts.categories;
  if (cats.empty()) cats = {"block-table", "block-chair", "block-sofa"};
  for (const auto& c : cats) {
    const auto known = procedural_categories();
    if (std::find(known.begin(), known.end(), c) == known.end()) {
      throw ConfigError("unknown category '" + c + "'");
    }
  }
  const std::size_t count = opts.count.value_or(60);
  const std::size_t res = opts.resolution.value_or(16);
  if (res < 8) throw ConfigError("--resolution must be >= 8");
  const std::size_t per = (count + cats.size() - 1) / cats.size();
  Dataset mix = gen_procedural_mix(cats, per, res, opts.seed.value_or(0));
  std::vector<std::size_t> keep(count);
  for (std::size_t i = 0; i < count; ++i) keep[i] = i;
  Dataset data = mix.subset(keep);
  OutputLock lock(dir);
  save_dataset(dir, data);
  out << "wrote " << data.size() << " shapes to " << dir.string() << "\n";
  return kExitOk;
}

fs::path input_path(const CommandOptions& opts, const std::string& command) {
  if (!opts.input) throw ConfigError(command + " needs an input file");
  return *opts.input;
}

fs::path output_file(const CommandOptions& opts, const fs::path& input, const char* ext) {
  if (opts.out) return *opts.out;
  fs::path p = input;
  p.replace_extension(ext);
  return p;
}

/// Locks the directory that will receive `file`.
fs::path parent_dir(const fs::path& file) {
  const fs::path parent = file.parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

int cmd_voxelize(const CommandOptions& opts, std::ostream& out) {
  const fs::path in = input_path(opts, "voxelize");
  std::ifstream stream(in);
  if (!stream) throw IoError("cannot open '" + in.string() + "'");
  const auto tris = parse_obj(stream);
  const std::size_t res = opts.resolution.value_or(32);
  if (res < 1) throw ConfigError("--resolution must be >= 1");
  const VoxelizeReport rep = voxelize_mesh(tris, res);
  const fs::path dst = output_file(opts, in, ".vgrid");
  make_dir(parent_dir(dst));
  OutputLock lock(parent_dir(dst));
  save_grid(dst, rep.grid);
  out << "voxelized " << tris.size() << " triangles at " << res << "^3 to " << dst.string()
      << " (" << rep.disagreements << " axis disagreements)\n";
  return kExitOk;
}

int cmd_export(const CommandOptions& opts, std::ostream& out) {
  const fs::path in = input_path(opts, "export");
  const VoxelGrid grid = load_grid(in);
  const fs::path dst = output_file(opts, in, ".obj");
  make_dir(parent_dir(dst));
  OutputLock lock(parent_dir(dst));
  write_file(dst, export_obj(grid, opts.threshold, opts.cull));
  out << "exported " << in.string() << " to " << dst.string() << "\n";
  return kExitOk;
}

}  // namespace

std::vector<std::string> command_names() {
  return {"train", "sample", "recover", "superres", "multigrid", "coop",
          "eval",  "dataset", "voxelize", "export"};
}

std::vector<std::string> metric_names() {
  return {"inception_score", "fid", "recovery_error", "softmax_prob", "classification_error"};
}

void apply_thread_count(std::optional<std::size_t> threads) {
  std::size_t n = 0;
  if (threads) {
    n = *threads;
  } else if (const char* env = std::getenv("VEBM_THREADS")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ConfigError("VEBM_THREADS must be a positive integer");
    n = static_cast<std::size_t>(v);
  } else {
    return;
  }
  if (n == 0) throw ConfigError("thread count must be >= 1");
  omp_set_num_threads(static_cast<int>(n));
}

OutputLock::OutputLock(const fs::path& dir) {
  make_dir(dir);
  file_ = dir / ".vebm.lock";
  std::FILE* f = std::fopen(file_.c_str(), "wx");
  if (!f) {
    if (fs::exists(file_)) {
      throw IoError("output directory '" + dir.string() + "' is locked by another command (" +
                    file_.string() + ")");
    }
    throw IoError("cannot create lock file '" + file_.string() + "'");
  }
  std::fclose(f);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(file_, ec);
}

Dataset load_run_data(const RunConfig& cfg) {
  if (cfg.data.path) {
    Dataset d = load_dataset(*cfg.data.path);
    if (d.convention != ValueConvention::kBinary01) {
      throw ConfigError("dataset '" + *cfg.data.path + "' is not binary");
    }
    return d;
  }
  return gen_procedural_mix(cfg.data.categories, cfg.data.per_category, cfg.data.resolution,
                            cfg.data.seed);
}

Dataset to_model_space(const Dataset& binary, ValueConvention convention) {
  switch (convention) {
    case ValueConvention::kMeanSubtracted: return preprocess(binary);
    case ValueConvention::kSignedUnit: return to_signed_unit(binary);
    case ValueConvention::kBinary01: return binary;
  }
  return binary;
}

std::unique_ptr<Trainer> make_trainer(const RunConfig& cfg, const Dataset& model_space) {
  std::vector<VoxelGrid> grids = model_space.grids;
  switch (cfg.mode) {
    case RunMode::kTrain:
      return std::make_unique<MleTrainer>(DescriptorModel(cfg.descriptor, cfg.ref_std, cfg.init_seed),
                                          std::move(grids), cfg.train);
    case RunMode::kRecover:
      return std::make_unique<RecoveryTrainer>(
          DescriptorModel(cfg.descriptor, cfg.ref_std, cfg.init_seed), std::move(grids), cfg.train);
    case RunMode::kSuperRes:
      return std::make_unique<SuperResTrainer>(
          DescriptorModel(cfg.descriptor, cfg.ref_std, cfg.init_seed), std::move(grids), cfg.train);
    case RunMode::kMultiGrid: {
      std::vector<DescriptorModel> models;
      for (const auto& arch : cfg.grid_descriptors) {
        models.emplace_back(arch, cfg.ref_std, cfg.init_seed);
      }
      return std::make_unique<MultiGridTrainer>(std::move(models), std::move(grids), cfg.train);
    }
    case RunMode::kCoop:
      return std::make_unique<CoopTrainer>(
          DescriptorModel(cfg.descriptor, cfg.ref_std, cfg.init_seed),
          GeneratorModel(*cfg.generator, cfg.generator_noise_std, cfg.init_seed + 1),
          std::move(grids), cfg.train);
  }
  throw ConfigError("unknown mode");
}

Checkpoint make_checkpoint(const RunConfig& cfg, double data_mean, const Trainer& trainer) {
  Checkpoint c;
  c.config = cfg;
  c.data_mean = data_mean;
  c.state = trainer.snapshot();
  return c;
}

std::vector<VoxelGrid> sample_checkpoint(const Checkpoint& ckpt, std::size_t count,
                                         std::uint64_t seed) {
  const RunConfig& cfg = ckpt.config;
  if (cfg.mode == RunMode::kRecover || cfg.mode == RunMode::kSuperRes) {
    throw ConfigError("checkpoint mode '" + std::string(run_mode_name(cfg.mode)) +
                      "' holds a conditional model; sample needs a train, coop or multigrid checkpoint");
  }
  if (count == 0) return {};
  switch (cfg.mode) {
    case RunMode::kTrain: {
      const DescriptorModel model = main_descriptor(ckpt);
      return to_binary(synthesize(model, count, cfg.sampling, seed), cfg.convention, ckpt.data_mean);
    }
    case RunMode::kCoop: {
      const DescriptorModel model = main_descriptor(ckpt);
      GeneratorModel gen(*cfg.generator, cfg.generator_noise_std, cfg.init_seed + 1);
      load_params(ckpt.state, "alpha/", gen.params());
      load_params(ckpt.state, "alpha_stats/", gen.buffers());
      Rng latent_rng(derive_seed(seed, kSampleLatents, 0));
      const Tensor proposals = gen.generate_batch(sample_prior_batch(count, gen.latent_dim(), latent_rng));
      std::vector<Rng> rngs = chain_rngs(derive_seed(seed, kSampleChains, 0), count);
      return to_binary(run_chain(model, proposals, cfg.sampling, rngs), cfg.convention,
                       ckpt.data_mean);
    }
    case RunMode::kMultiGrid: {
      std::vector<DescriptorModel> models;
      for (std::size_t s = 0; s < cfg.grid_descriptors.size(); ++s) {
        models.push_back(
            descriptor_from(ckpt, cfg.grid_descriptors[s], "theta" + std::to_string(s + 1) + "/"));
      }
      HistogramModel hist{real_vector(ckpt, "histogram/edges"),
                          real_vector(ckpt, "histogram/probabilities")};
      const auto pyramids = sample_multigrid(models, hist, cfg.train.ladder, cfg.sampling, count, seed);
      std::vector<VoxelGrid> out;
      for (const auto& p : pyramids) out.push_back(postprocess(p.levels.back(), cfg.convention, ckpt.data_mean));
      return out;
    }
    default:
      break;
  }
  return {};
}

int run_command(const std::string& name, const CommandOptions& opts, std::ostream& out,
                std::ostream& err) {
  try {
    apply_thread_count(opts.threads);
    if (name == "train" || name == "recover" || name == "superres" || name == "multigrid" ||
        name == "coop") {
      return cmd_train(name, opts, out);
    }
    if (name == "sample") return cmd_sample(opts, out);
    if (name == "eval") return cmd_eval(opts, out);
    if (name == "dataset") return cmd_dataset(opts, out);
    if (name == "voxelize") return cmd_voxelize(opts, out);
    if (name == "export") return cmd_export(opts, out);
    err << "error: unknown command '" << name << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "error: io: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    err << "error: format: " << e.what() << "\n";
    return kExitFormat;
  } catch (const DivergenceError& e) {
    err << "error: divergence at Langevin step " << e.step() << ": " << e.what() << "\n";
    return kExitDivergence;
  } catch (const NonFiniteError& e) {
    err << "error: non-finite value: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const ShapeError& e) {
    err << "error: shape: " << e.what() << "\n";
    return kExitShape;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace vebm
