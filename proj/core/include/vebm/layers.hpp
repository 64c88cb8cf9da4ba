#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vebm/graph.hpp"
#include "vebm/rng.hpp"
#include "vebm/tensor.hpp"

namespace vebm {

enum class LayerKind {
  kConv3d,
  kDeconv3d,
  kFullyConnected,
  kRelu,
  kTanh,
  kBatchNorm3d,
  kMaxPool3d,
};

std::string_view layer_kind_name(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(std::string_view name);

/// One entry of a network description. Convolutions use SAME zero padding.
struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::size_t kernel = 1;    // conv / deconv / maxpool edge length
  std::size_t stride = 1;    // conv stride, or deconv up-sampling factor
  std::size_t channels = 1;  // output channels, or FC units
  bool bias = true;
  Shape reshape_to;          // FC only: per-sample output shape

  static LayerSpec conv(std::size_t channels, std::size_t kernel, std::size_t stride);
  static LayerSpec deconv(std::size_t channels, std::size_t kernel, std::size_t up);
  static LayerSpec fc(std::size_t units, bool bias = true, Shape reshape_to = {});
  static LayerSpec relu() { return with_kind(LayerKind::kRelu); }
  static LayerSpec tanh() { return with_kind(LayerKind::kTanh); }
  static LayerSpec batchnorm() { return with_kind(LayerKind::kBatchNorm3d); }
  static LayerSpec maxpool(std::size_t kernel);
  static LayerSpec with_kind(LayerKind kind) {
    LayerSpec s;
    s.kind = kind;
    return s;
  }

  /// Throws ConfigError on kernel/stride/channel counts below 1.
  void validate() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Ordered, named tensors.
class ParamSet {
 public:
  void add(std::string name, Tensor value);

  std::size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Tensor& operator[](std::size_t i) { return tensors_.at(i); }
  const Tensor& operator[](std::size_t i) const { return tensors_.at(i); }
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t element_count() const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

enum class ParamRole { kWeight, kBias, kScale, kShift, kRunningMean, kRunningVar };

/// A layer list lowered onto a Graph.
struct NetworkLayout {
  Graph graph;
  NodeId input = 0;
  NodeId output = 0;
  std::vector<NodeId> param_nodes;     // trainable leaves, ParamSet order
  std::vector<std::string> param_names;
  std::vector<Shape> param_shapes;
  std::vector<ParamRole> param_roles;
  std::vector<NodeId> buffer_nodes;    // batchnorm running statistics
  std::vector<std::string> buffer_names;
  std::vector<Shape> buffer_shapes;
  std::vector<ParamRole> buffer_roles;
  std::vector<NodeId> layer_outputs;   // one per LayerSpec
  std::vector<Shape> layer_shapes;     // per-sample output shape per layer
};

/// Lowers `layers` onto a fresh graph whose input leaf is named `input_name`
/// and holds [N, input_per_sample...]. Leaf names are "<prefix><index>.<role>".
NetworkLayout build_network(std::span<const LayerSpec> layers,
                            const Shape& input_per_sample,
                            const std::string& prefix,
                            const std::string& input_name,
                            BatchNormMode mode = BatchNormMode::kTraining);

/// Weights ~ N(0, weight_std^2), zero biases, unit scales, zero shifts.
ParamSet init_params(const NetworkLayout& layout, Rng& rng, double weight_std = 0.01);
/// Zero running means, unit running variances.
ParamSet init_buffers(const NetworkLayout& layout);

/// Binds values[i] to nodes[i].
void bind_all(Bindings<float>& bindings, std::span<const NodeId> nodes,
              const ParamSet& values);

}  // namespace vebm
