#include "vebm/layers.hpp"

#include <sstream>

namespace vebm {

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv3d: return "conv3d";
    case LayerKind::kDeconv3d: return "deconv3d";
    case LayerKind::kFullyConnected: return "fully_connected";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kTanh: return "tanh";
    case LayerKind::kBatchNorm3d: return "batchnorm3d";
    case LayerKind::kMaxPool3d: return "maxpool3d";
  }
  return "?";
}

std::optional<LayerKind> parse_layer_kind(std::string_view name) {
  for (LayerKind k : {LayerKind::kConv3d, LayerKind::kDeconv3d,
                      LayerKind::kFullyConnected, LayerKind::kRelu,
                      LayerKind::kTanh, LayerKind::kBatchNorm3d,
                      LayerKind::kMaxPool3d}) {
    if (layer_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

LayerSpec LayerSpec::conv(std::size_t channels, std::size_t kernel,
                          std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::kConv3d;
  s.channels = channels;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::deconv(std::size_t channels, std::size_t kernel,
                            std::size_t up) {
  LayerSpec s = conv(channels, kernel, up);
  s.kind = LayerKind::kDeconv3d;
  return s;
}

LayerSpec LayerSpec::fc(std::size_t units, bool bias, Shape reshape_to) {
  LayerSpec s;
  s.kind = LayerKind::kFullyConnected;
  s.channels = units;
  s.bias = bias;
  s.reshape_to = std::move(reshape_to);
  return s;
}

LayerSpec LayerSpec::maxpool(std::size_t kernel) {
  LayerSpec s;
  s.kind = LayerKind::kMaxPool3d;
  s.kernel = kernel;
  return s;
}

void LayerSpec::validate() const {
  const std::string k(layer_kind_name(kind));
  if (kernel < 1) throw ConfigError(k + ": kernel must be >= 1");
  if (stride < 1) throw ConfigError(k + ": stride must be >= 1");
  if (channels < 1) throw ConfigError(k + ": channel count must be >= 1");
  if (!reshape_to.empty() && shape_volume(reshape_to) != channels) {
    throw ConfigError(k + ": reshape target " + shape_string(reshape_to) +
                      " does not hold " + std::to_string(channels) + " units");
  }
}

void ParamSet::add(std::string name, Tensor value) {
  if (find(name)) throw ShapeError("duplicate parameter '" + name + "'");
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
}

std::optional<std::size_t> ParamSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t ParamSet::element_count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void require_volume(const Shape& s, std::size_t index, LayerKind kind) {
  if (s.size() != 4) {
    throw ConfigError("layer " + std::to_string(index) + " (" +
                      std::string(layer_kind_name(kind)) +
                      ") needs a [C, D, H, W] input, got " + shape_string(s));
  }
}

}  // namespace

NetworkLayout build_network(std::span<const LayerSpec> layers,
                            const Shape& input_per_sample,
                            const std::string& prefix,
                            const std::string& input_name, BatchNormMode mode) {
  NetworkLayout net;
  net.input = net.graph.input(input_name);
  NodeId cur = net.input;
  Shape shape = input_per_sample;

  auto add_param = [&](std::size_t layer, const char* role_name, ParamRole role,
                       Shape s) {
    std::string name = prefix + std::to_string(layer) + "." + role_name;
    const NodeId id = net.graph.parameter(name);
    net.param_nodes.push_back(id);
    net.param_names.push_back(std::move(name));
    net.param_shapes.push_back(std::move(s));
    net.param_roles.push_back(role);
    return id;
  };
  auto add_buffer = [&](std::size_t layer, const char* role_name, ParamRole role,
                        Shape s) {
    std::string name = prefix + std::to_string(layer) + "." + role_name;
    const NodeId id = net.graph.parameter(name);
    net.buffer_nodes.push_back(id);
    net.buffer_names.push_back(std::move(name));
    net.buffer_shapes.push_back(std::move(s));
    net.buffer_roles.push_back(role);
    return id;
  };

  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    l.validate();
    switch (l.kind) {
      case LayerKind::kConv3d: {
        require_volume(shape, i, l.kind);
        const NodeId w = add_param(i, "weight", ParamRole::kWeight,
                                   {l.channels, shape[0], l.kernel, l.kernel, l.kernel});
        std::optional<NodeId> b;
        if (l.bias) b = add_param(i, "bias", ParamRole::kBias, {l.channels});
        cur = net.graph.conv3d(cur, w, b, l.stride);
        shape = {l.channels, ceil_div(shape[1], l.stride),
                 ceil_div(shape[2], l.stride), ceil_div(shape[3], l.stride)};
        break;
      }
      case LayerKind::kDeconv3d: {
        require_volume(shape, i, l.kind);
        const NodeId w = add_param(i, "weight", ParamRole::kWeight,
                                   {shape[0], l.channels, l.kernel, l.kernel, l.kernel});
        std::optional<NodeId> b;
        if (l.bias) b = add_param(i, "bias", ParamRole::kBias, {l.channels});
        cur = net.graph.deconv3d(cur, w, b, l.stride);
        shape = {l.channels, shape[1] * l.stride, shape[2] * l.stride,
                 shape[3] * l.stride};
        break;
      }
      case LayerKind::kFullyConnected: {
        const NodeId w = add_param(i, "weight", ParamRole::kWeight,
                                   {l.channels, shape_volume(shape)});
        std::optional<NodeId> b;
        if (l.bias) b = add_param(i, "bias", ParamRole::kBias, {l.channels});
        cur = net.graph.fully_connected(cur, w, b);
        if (!l.reshape_to.empty()) {
          cur = net.graph.reshape(cur, l.reshape_to);
          shape = l.reshape_to;
        } else {
          shape = {l.channels};
        }
        break;
      }
      case LayerKind::kRelu:
        cur = net.graph.relu(cur);
        break;
      case LayerKind::kTanh:
        cur = net.graph.tanh(cur);
        break;
      case LayerKind::kBatchNorm3d: {
        require_volume(shape, i, l.kind);
        const std::size_t c = shape[0];
        const NodeId g = add_param(i, "scale", ParamRole::kScale, {c});
        const NodeId b = add_param(i, "shift", ParamRole::kShift, {c});
        const NodeId rm = add_buffer(i, "running_mean", ParamRole::kRunningMean, {c});
        const NodeId rv = add_buffer(i, "running_var", ParamRole::kRunningVar, {c});
        cur = net.graph.batchnorm3d(cur, g, b, rm, rv, mode);
        break;
      }
      case LayerKind::kMaxPool3d:
        require_volume(shape, i, l.kind);
        cur = net.graph.maxpool3d(cur, l.kernel);
        shape = {shape[0], ceil_div(shape[1], l.kernel),
                 ceil_div(shape[2], l.kernel), ceil_div(shape[3], l.kernel)};
        break;
    }
    net.layer_outputs.push_back(cur);
    net.layer_shapes.push_back(shape);
  }
  net.output = cur;
  return net;
}

namespace {

Tensor init_tensor(const Shape& shape, ParamRole role, Rng& rng, double weight_std) {
  Tensor t(shape);
  switch (role) {
    case ParamRole::kWeight:
      for (float& v : t.data()) v = static_cast<float>(weight_std * rng.normal());
      break;
    case ParamRole::kScale:
    case ParamRole::kRunningVar:
      t.fill(1.0f);
      break;
    case ParamRole::kBias:
    case ParamRole::kShift:
    case ParamRole::kRunningMean:
      break;
  }
  return t;
}

}  // namespace

ParamSet init_params(const NetworkLayout& layout, Rng& rng, double weight_std) {
  ParamSet p;
  for (std::size_t i = 0; i < layout.param_nodes.size(); ++i) {
    p.add(layout.param_names[i],
          init_tensor(layout.param_shapes[i], layout.param_roles[i], rng, weight_std));
  }
  return p;
}

ParamSet init_buffers(const NetworkLayout& layout) {
  ParamSet p;
  Rng unused;
  for (std::size_t i = 0; i < layout.buffer_nodes.size(); ++i) {
    p.add(layout.buffer_names[i],
          init_tensor(layout.buffer_shapes[i], layout.buffer_roles[i], unused, 0.0));
  }
  return p;
}

void bind_all(Bindings<float>& bindings, std::span<const NodeId> nodes,
              const ParamSet& values) {
  if (nodes.size() != values.size()) {
    throw ShapeError("bind_all: " + std::to_string(values.size()) +
                     " tensors for " + std::to_string(nodes.size()) + " nodes");
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) bindings.bind(nodes[i], values[i]);
}

}  // namespace vebm
