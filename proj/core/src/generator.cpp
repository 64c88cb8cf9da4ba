#include "vebm/generator.hpp"

#include <map>

#include "vebm/errors.hpp"

namespace vebm {
namespace {

using L = LayerSpec;

GeneratorArchitecture paper_coop() {
  GeneratorArchitecture a;
  a.latent_dim = 100;
  a.grid = {32, 32, 32};
  a.layers = {L::fc(256 * 64, true, {256, 4, 4, 4}),
              L::batchnorm(), L::relu(),
              L::deconv(256, 4, 1), L::batchnorm(), L::relu(),
              L::deconv(128, 4, 2), L::batchnorm(), L::relu(),
              L::deconv(64, 4, 2),  L::batchnorm(), L::relu(),
              L::deconv(1, 4, 2),   L::tanh()};
  return a;
}

GeneratorArchitecture desk_coop() {
  GeneratorArchitecture a;
  a.latent_dim = 32;
  a.grid = {16, 16, 16};
  a.layers = {L::fc(64 * 64, true, {64, 4, 4, 4}),
              L::batchnorm(), L::relu(),
              L::deconv(32, 4, 2), L::batchnorm(), L::relu(),
              L::deconv(1, 4, 2),  L::tanh()};
  return a;
}

const std::map<std::string, GeneratorArchitecture, std::less<>>& presets() {
  static const std::map<std::string, GeneratorArchitecture, std::less<>> table = {
      {"paper-coop-32", paper_coop()},
      {"desk-coop-16", desk_coop()},
  };
  return table;
}

}  // namespace

GeneratorArchitecture generator_preset(std::string_view name) {
  const auto& table = presets();
  auto it = table.find(name);
  if (it == table.end()) {
    throw ConfigError("unknown generator preset '" + std::string(name) + "'");
  }
  return it->second;
}

std::vector<std::string> generator_preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : presets()) names.push_back(name);
  return names;
}

GeneratorModel::GeneratorModel(GeneratorArchitecture arch, double noise_std,
                               std::uint64_t init_seed)
    : arch_(std::move(arch)), noise_std_(noise_std) {
  if (arch_.latent_dim < 1) throw ConfigError("latent dimension must be >= 1");
  if (!(noise_std_ >= 0.0)) throw ConfigError("generator noise std must be >= 0");
  if (arch_.latent_dim >= arch_.grid.volume()) {
    throw ConfigError("latent dimension must be smaller than the voxel count");
  }
  train_ = build_network(arch_.layers, {arch_.latent_dim}, "g", "Z",
                         BatchNormMode::kTraining);
  const Shape& out = train_.layer_shapes.back();
  if (out != Shape{1, arch_.grid.d, arch_.grid.h, arch_.grid.w}) {
    throw ConfigError("generator produces " + shape_string(out) +
                      " but the target grid is " + shape_string({1, arch_.grid.d,
                                                                 arch_.grid.h,
                                                                 arch_.grid.w}));
  }
  target_ = train_.graph.input("target");
  loss_ = train_.graph.squared_error(train_.output, target_);
  inference_ = train_.graph.with_batchnorm_mode(BatchNormMode::kInference);
  Rng rng(init_seed);
  params_ = init_params(train_, rng);
  buffers_ = init_buffers(train_);
}

void GeneratorModel::check_latents(const Tensor& latents) const {
  if (latents.rank() != 2 || latents.dim(0) < 1 || latents.dim(1) != arch_.latent_dim) {
    throw ShapeError("generator expects latents [N, " +
                     std::to_string(arch_.latent_dim) + "], got " +
                     shape_string(latents.shape()));
  }
}

Bindings<float> GeneratorModel::bind(const Tensor& latents) const {
  check_latents(latents);
  Bindings<float> b;
  b.bind(train_.input, latents);
  bind_all(b, train_.param_nodes, params_);
  bind_all(b, train_.buffer_nodes, buffers_);
  return b;
}

Tensor GeneratorModel::generate_batch(const Tensor& latents) const {
  const NodeId outs[] = {train_.output};
  Values<float> v = forward(inference_, bind(latents), outs);
  return v[train_.output];
}

Tensor GeneratorModel::generate_training(const Tensor& latents) const {
  const NodeId outs[] = {train_.output};
  Values<float> v = forward(train_.graph, bind(latents), outs);
  return v[train_.output];
}

GeneratorModel::RegressionResult GeneratorModel::regression_grad(const Tensor& latents,
                                                                 const Tensor& target) {
  const std::size_t n = latents.rank() == 2 ? latents.dim(0) : 0;
  if (target.shape() != Shape{n, 1, arch_.grid.d, arch_.grid.h, arch_.grid.w}) {
    throw ShapeError("generator regression target has shape " +
                     shape_string(target.shape()));
  }
  Bindings<float> b = bind(latents);
  b.bind(target_, target);
  const NodeId outs[] = {loss_};
  const Values<float> v = forward(train_.graph, b, outs);
  GradMap<float> g = backward(train_.graph, v, loss_);

  const double scale = 1.0 / static_cast<double>(target.size());
  RegressionResult r;
  r.loss = v[loss_][0] * scale;
  r.output = v[train_.output];
  for (NodeId id : train_.param_nodes) {
    Tensor grad = std::move(g.slot(id));
    for (float& x : grad.data()) x = static_cast<float>(x * scale);
    r.grads.push_back(std::move(grad));
  }

  // Buffers come in (running_mean, running_var) pairs, one pair per batchnorm.
  std::size_t buf = 0;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    if (arch_.layers[i].kind != LayerKind::kBatchNorm3d) continue;
    const NodeId bn = train_.layer_outputs[i];
    const Tensor& mean = v.batch_mean(bn);
    const Tensor& var = v.batch_var(bn);
    Tensor& rm = buffers_[buf];
    Tensor& rv = buffers_[buf + 1];
    for (std::size_t c = 0; c < rm.size(); ++c) {
      rm[c] = static_cast<float>(kRunningStatMomentum * rm[c] +
                                 (1.0 - kRunningStatMomentum) * mean[c]);
      rv[c] = static_cast<float>(kRunningStatMomentum * rv[c] +
                                 (1.0 - kRunningStatMomentum) * var[c]);
    }
    buf += 2;
  }
  return r;
}

std::vector<float> sample_prior(std::size_t d, Rng& rng) {
  if (d < 1) throw ConfigError("latent dimension must be >= 1");
  std::vector<float> z(d);
  for (float& v : z) v = static_cast<float>(rng.normal());
  return z;
}

Tensor sample_prior_batch(std::size_t n, std::size_t d, Rng& rng) {
  Tensor z({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<float> row = sample_prior(d, rng);
    std::copy(row.begin(), row.end(), z.raw() + i * d);
  }
  return z;
}

namespace {

Tensor latent_row(const GeneratorModel& model, std::span<const float> z) {
  if (z.size() != model.latent_dim()) {
    throw ShapeError("latent vector has " + std::to_string(z.size()) +
                     " entries, expected " + std::to_string(model.latent_dim()));
  }
  return Tensor({1, z.size()}, std::vector<float>(z.begin(), z.end()));
}

}  // namespace

VoxelGrid generate(const GeneratorModel& model, std::span<const float> latent,
                   Rng& rng, bool add_noise) {
  Tensor y = model.generate_batch(latent_row(model, latent));
  if (add_noise) {
    for (float& v : y.data()) v = static_cast<float>(v + model.noise_std() * rng.normal());
  }
  return unstack(y, 0);
}

std::vector<double> interpolation_grid(std::size_t count) {
  std::vector<double> rhos(count);
  for (std::size_t i = 0; i < count; ++i) {
    rhos[i] = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return rhos;
}

std::vector<VoxelGrid> interpolate(const GeneratorModel& model,
                                   std::span<const float> z0,
                                   std::span<const float> z1,
                                   std::span<const double> rhos) {
  if (z0.size() != z1.size()) throw ShapeError("interpolate: latent sizes differ");
  std::vector<VoxelGrid> frames;
  for (double rho : rhos) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("interpolation weight outside [0, 1]");
    std::vector<float> z(z0.size());
    for (std::size_t k = 0; k < z.size(); ++k) {
      z[k] = static_cast<float>((1.0 - rho) * z0[k] + rho * z1[k]);
    }
    frames.push_back(unstack(model.generate_batch(latent_row(model, z)), 0));
  }
  return frames;
}

VoxelGrid latent_arithmetic(const GeneratorModel& model, std::span<const float> za,
                            std::span<const float> zb, std::span<const float> zc) {
  if (za.size() != zb.size() || za.size() != zc.size()) {
    throw ShapeError("latent arithmetic: latent sizes differ");
  }
  std::vector<float> z(za.size());
  // In double, so za - zb + zb and za - za + zc both come back exactly.
  for (std::size_t k = 0; k < z.size(); ++k) {
    z[k] = static_cast<float>(static_cast<double>(za[k]) - zb[k] + zc[k]);
  }
  return unstack(model.generate_batch(latent_row(model, z)), 0);
}

}  // namespace vebm
