#pragma once

// Static computation graphs with reverse-mode differentiation.
//
// A Graph is an append-only list of op records; every op may only reference
// nodes created before it, so node order is a topological order and cycles
// cannot be expressed. Leaves (inputs and parameters) are bound per
// evaluation, which lets one graph serve every iteration of a training loop
// and be evaluated concurrently from several threads.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vebm/kernels.hpp"
#include "vebm/tensor.hpp"

namespace vebm {

using NodeId = std::uint32_t;

enum class OpKind : std::uint8_t {
  kInput,
  kParameter,
  kConv3d,
  kDeconv3d,
  kFullyConnected,
  kReshape,
  kRelu,
  kTanh,
  kBatchNorm3d,
  kMaxPool3d,
  kAdd,
  kMul,
  kSum,
  kSquaredError,
};

const char* op_name(OpKind kind);

struct Node {
  OpKind kind = OpKind::kInput;
  std::vector<NodeId> inputs;
  std::string name;         // set for leaves
  std::size_t window = 1;   // stride, up-sampling factor or pooling kernel
  bool has_bias = false;
  Shape per_sample;         // reshape target, batch axis excluded
  BatchNormMode bn_mode = BatchNormMode::kInference;
  double bn_eps = 1e-5;

  bool is_leaf() const {
    return kind == OpKind::kInput || kind == OpKind::kParameter;
  }
};

class Graph {
 public:
  NodeId input(std::string name);
  NodeId parameter(std::string name);

  NodeId conv3d(NodeId x, NodeId filters, std::optional<NodeId> bias,
                std::size_t stride);
  NodeId deconv3d(NodeId x, NodeId filters, std::optional<NodeId> bias,
                  std::size_t up_factor);
  NodeId fully_connected(NodeId x, NodeId weights, std::optional<NodeId> bias);
  NodeId reshape(NodeId x, Shape per_sample);
  NodeId relu(NodeId x);
  NodeId tanh(NodeId x);
  /// Inputs after x: scale, shift, running mean, running variance.
  NodeId batchnorm3d(NodeId x, NodeId scale, NodeId shift, NodeId running_mean,
                     NodeId running_var, BatchNormMode mode, double eps = 1e-5);
  NodeId maxpool3d(NodeId x, std::size_t kernel);
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  /// Scalar sum of every element.
  NodeId sum(NodeId x);
  /// Scalar sum of (x - target)^2.
  NodeId squared_error(NodeId x, NodeId target);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const;
  std::span<const Node> nodes() const { return nodes_; }
  std::optional<NodeId> find_leaf(std::string_view name) const;

  /// Copy with every batchnorm node switched to `mode`.
  Graph with_batchnorm_mode(BatchNormMode mode) const;

 private:
  NodeId push(Node node);
  NodeId leaf(OpKind kind, std::string name);

  std::vector<Node> nodes_;
};

/// Non-owning leaf bindings. Bound tensors must outlive the forward call.
template <typename T>
class Bindings {
 public:
  Bindings& bind(NodeId id, const BasicTensor<T>& value);
  const BasicTensor<T>* find(NodeId id) const;

 private:
  std::vector<std::pair<NodeId, const BasicTensor<T>*>> entries_;
};

/// Forward results. Owns a copy of every evaluated node value.
template <typename T>
class Values {
 public:
  explicit Values(std::size_t nodes)
      : values_(nodes), computed_(nodes, false), argmax_(nodes),
        bn_mean_(nodes), bn_var_(nodes) {}

  bool has(NodeId id) const { return id < computed_.size() && computed_[id]; }
  const BasicTensor<T>& operator[](NodeId id) const;

  /// Statistics a batchnorm node normalized with.
  const BasicTensor<T>& batch_mean(NodeId id) const { return bn_mean_.at(id); }
  const BasicTensor<T>& batch_var(NodeId id) const { return bn_var_.at(id); }
  const std::vector<std::size_t>& argmax(NodeId id) const { return argmax_.at(id); }

  void store(NodeId id, BasicTensor<T> value) {
    values_.at(id) = std::move(value);
    computed_[id] = true;
  }
  void store_argmax(NodeId id, std::vector<std::size_t> idx) {
    argmax_.at(id) = std::move(idx);
  }
  void store_batch_stats(NodeId id, BasicTensor<T> mean, BasicTensor<T> var) {
    bn_mean_.at(id) = std::move(mean);
    bn_var_.at(id) = std::move(var);
  }

 private:
  std::vector<BasicTensor<T>> values_;
  std::vector<bool> computed_;
  std::vector<std::vector<std::size_t>> argmax_;
  std::vector<BasicTensor<T>> bn_mean_;
  std::vector<BasicTensor<T>> bn_var_;
};

/// Gradient of one scalar node with respect to each of its ancestors.
template <typename T>
class GradMap {
 public:
  explicit GradMap(std::size_t nodes) : grads_(nodes) {}

  bool has(NodeId id) const { return id < grads_.size() && !grads_[id].empty(); }
  const BasicTensor<T>& operator[](NodeId id) const;
  BasicTensor<T>& slot(NodeId id) { return grads_.at(id); }

 private:
  std::vector<BasicTensor<T>> grads_;
};

/// Evaluates the ancestors of `outputs` (every node when empty). Throws
/// ShapeError on inconsistent shapes or unbound leaves and NonFiniteError if
/// any op produces NaN/Inf.
template <typename T>
Values<T> forward(const Graph& graph, const Bindings<T>& bindings,
                  std::span<const NodeId> outputs = {});

/// Reverse sweep from the scalar node `seed`.
template <typename T>
GradMap<T> backward(const Graph& graph, const Values<T>& values, NodeId seed);

/// Central differences (f(x+h) - f(x-h)) / 2h of the scalar `output` with
/// respect to every element of leaf `wrt`, evaluated in double precision.
TensorD finite_diff_grad(const Graph& graph, const Bindings<float>& bindings,
                         NodeId output, NodeId wrt, double h);
TensorD finite_diff_grad(const Graph& graph, const Bindings<double>& bindings,
                         NodeId output, NodeId wrt, double h);

}  // namespace vebm
