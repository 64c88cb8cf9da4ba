#include "vebm/energy_model.hpp"

#include <map>

namespace vebm {
namespace {

using L = LayerSpec;

DescriptorArchitecture arch(std::size_t n, std::vector<LayerSpec> layers) {
  layers.push_back(L::fc(1, /*bias=*/false));
  return {std::move(layers), {n, n, n}};
}

const std::map<std::string, DescriptorArchitecture, std::less<>>& presets() {
  static const std::map<std::string, DescriptorArchitecture, std::less<>> table = {
      // Full-size architectures.
      {"paper-synthesis-32",
       arch(32, {L::conv(200, 16, 3), L::relu(), L::conv(100, 6, 2), L::relu()})},
      {"paper-recovery-32", arch(32, {L::conv(100, 16, 3), L::relu()})},
      {"paper-superres-64", arch(64, {L::conv(200, 16, 3), L::relu()})},
      {"paper-coop-32", arch(32, {L::conv(64, 9, 2), L::relu(), L::conv(128, 7, 2),
                                  L::relu(), L::conv(256, 4, 2), L::relu()})},
      {"paper-multigrid-4", arch(4, {L::conv(128, 4, 1), L::relu()})},
      {"paper-multigrid-16", arch(16, {L::conv(256, 8, 2), L::relu()})},
      {"paper-multigrid-32",
       arch(32, {L::conv(256, 16, 3), L::relu(), L::conv(128, 6, 2), L::relu()})},
      {"paper-multigrid-64",
       arch(64, {L::conv(256, 16, 3), L::relu(), L::conv(128, 6, 2), L::relu()})},
      {"paper-multigrid-128",
       arch(128, {L::conv(256, 16, 4), L::relu(), L::conv(128, 8, 2), L::relu()})},
      // Desk-scale architectures.
      {"desk-synthesis-16",
       arch(16, {L::conv(16, 4, 2), L::relu(), L::conv(32, 3, 2), L::relu()})},
      {"desk-recovery-16",
       arch(16, {L::conv(16, 4, 2), L::relu(), L::conv(32, 3, 2), L::relu()})},
      {"desk-superres-16",
       arch(16, {L::conv(16, 4, 2), L::relu(), L::conv(32, 3, 2), L::relu()})},
      {"desk-coop-16",
       arch(16, {L::conv(16, 4, 2), L::relu(), L::conv(32, 3, 2), L::relu()})},
      {"desk-multigrid-4", arch(4, {L::conv(16, 2, 1), L::relu()})},
      {"desk-multigrid-8", arch(8, {L::conv(16, 4, 2), L::relu()})},
      {"desk-multigrid-16",
       arch(16, {L::conv(16, 4, 2), L::relu(), L::conv(32, 3, 2), L::relu()})},
      {"toy-8", arch(8, {L::conv(8, 3, 2), L::relu()})},
  };
  return table;
}

}  // namespace

DescriptorArchitecture descriptor_preset(std::string_view name) {
  const auto& table = presets();
  auto it = table.find(name);
  if (it == table.end()) {
    throw ConfigError("unknown descriptor preset '" + std::string(name) + "'");
  }
  return it->second;
}

std::vector<std::string> descriptor_preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : presets()) names.push_back(name);
  return names;
}

DescriptorModel::DescriptorModel(DescriptorArchitecture arch, double ref_std,
                                 std::uint64_t init_seed)
    : arch_(std::move(arch)), ref_std_(ref_std) {
  if (!(ref_std_ > 0.0)) throw ConfigError("reference std s must be positive");
  if (arch_.layers.empty() ||
      arch_.layers.back().kind != LayerKind::kFullyConnected ||
      arch_.layers.back().channels != 1 || !arch_.layers.back().reshape_to.empty()) {
    throw ConfigError("descriptor must end in a single-unit fully connected layer");
  }
  net_ = build_network(arch_.layers, {1, arch_.grid.d, arch_.grid.h, arch_.grid.w},
                       "f", "Y");
  total_ = net_.graph.sum(net_.output);
  Rng rng(init_seed);
  params_ = init_params(net_, rng);
}

void DescriptorModel::check_batch(const Tensor& batch) const {
  const Shape& s = batch.shape();
  if (s.size() != 5 || s[0] < 1 || s[1] != 1 || s[2] != arch_.grid.d ||
      s[3] != arch_.grid.h || s[4] != arch_.grid.w) {
    throw ShapeError("descriptor expects [N, 1, " + std::to_string(arch_.grid.d) +
                     ", " + std::to_string(arch_.grid.h) + ", " +
                     std::to_string(arch_.grid.w) + "], got " + shape_string(s));
  }
}

Bindings<float> DescriptorModel::bind(const Tensor& batch) const {
  check_batch(batch);
  Bindings<float> b;
  b.bind(net_.input, batch);
  bind_all(b, net_.param_nodes, params_);
  return b;
}

std::vector<double> squared_norms(const Tensor& batch) {
  const std::size_t n = batch.dim(0);
  const std::size_t per = batch.size() / n;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = squared_norm(batch.data().subspan(i * per, per));
  }
  return out;
}

std::vector<double> score(const DescriptorModel& model, const Tensor& batch) {
  const NodeId outs[] = {model.score_node()};
  const Values<float> v = forward(model.graph(), model.bind(batch), outs);
  const Tensor& s = v[model.score_node()];
  return {s.data().begin(), s.data().end()};
}

std::vector<double> energy(const DescriptorModel& model, const Tensor& batch) {
  std::vector<double> e = score(model, batch);
  const std::vector<double> norms = squared_norms(batch);
  const double two_s2 = 2.0 * model.ref_std() * model.ref_std();
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = norms[i] / two_s2 - e[i];
  return e;
}

Tensor score_grad_input(const DescriptorModel& model, const Tensor& batch) {
  const NodeId outs[] = {model.total_node()};
  const Values<float> v = forward(model.graph(), model.bind(batch), outs);
  GradMap<float> g = backward(model.graph(), v, model.total_node());
  // Samples do not interact, so d(Σ f)/dY_i = df(Y_i)/dY_i.
  return std::move(g.slot(model.input_node()));
}

Tensor hopfield_residual(const DescriptorModel& model, const Tensor& batch) {
  Tensor r = score_grad_input(model, batch);
  const double inv_s2 = 1.0 / (model.ref_std() * model.ref_std());
  for (std::size_t k = 0; k < r.size(); ++k) {
    r[k] = static_cast<float>(batch[k] * inv_s2 - r[k]);
  }
  return r;
}

std::vector<Tensor> score_grad_params(const DescriptorModel& model,
                                      const Tensor& batch) {
  const NodeId outs[] = {model.total_node()};
  const Values<float> v = forward(model.graph(), model.bind(batch), outs);
  GradMap<float> g = backward(model.graph(), v, model.total_node());
  std::vector<Tensor> out;
  out.reserve(model.layout().param_nodes.size());
  for (NodeId id : model.layout().param_nodes) out.push_back(std::move(g.slot(id)));
  return out;
}

}  // namespace vebm
