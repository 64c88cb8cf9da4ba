#include "vebm/graph.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace vebm {

std::size_t shape_volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kParameter: return "parameter";
    case OpKind::kConv3d: return "conv3d";
    case OpKind::kDeconv3d: return "deconv3d";
    case OpKind::kFullyConnected: return "fully_connected";
    case OpKind::kReshape: return "reshape";
    case OpKind::kRelu: return "relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kBatchNorm3d: return "batchnorm3d";
    case OpKind::kMaxPool3d: return "maxpool3d";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kSum: return "sum";
    case OpKind::kSquaredError: return "squared_error";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Graph construction

NodeId Graph::push(Node node) {
  for (NodeId in : node.inputs) {
    if (in >= nodes_.size()) {
      throw ShapeError(std::string(op_name(node.kind)) +
                       ": references unknown node " + std::to_string(in));
    }
  }
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::leaf(OpKind kind, std::string name) {
  if (find_leaf(name)) throw ShapeError("duplicate leaf name '" + name + "'");
  Node n;
  n.kind = kind;
  n.name = std::move(name);
  return push(std::move(n));
}

NodeId Graph::input(std::string name) { return leaf(OpKind::kInput, std::move(name)); }

NodeId Graph::parameter(std::string name) {
  return leaf(OpKind::kParameter, std::move(name));
}

NodeId Graph::conv3d(NodeId x, NodeId filters, std::optional<NodeId> bias,
                     std::size_t stride) {
  if (stride < 1) throw ShapeError("conv3d: stride must be >= 1");
  Node n;
  n.kind = OpKind::kConv3d;
  n.inputs = {x, filters};
  if (bias) n.inputs.push_back(*bias);
  n.has_bias = bias.has_value();
  n.window = stride;
  return push(std::move(n));
}

NodeId Graph::deconv3d(NodeId x, NodeId filters, std::optional<NodeId> bias,
                       std::size_t up_factor) {
  if (up_factor < 1) throw ShapeError("deconv3d: up_factor must be >= 1");
  Node n;
  n.kind = OpKind::kDeconv3d;
  n.inputs = {x, filters};
  if (bias) n.inputs.push_back(*bias);
  n.has_bias = bias.has_value();
  n.window = up_factor;
  return push(std::move(n));
}

NodeId Graph::fully_connected(NodeId x, NodeId weights, std::optional<NodeId> bias) {
  Node n;
  n.kind = OpKind::kFullyConnected;
  n.inputs = {x, weights};
  if (bias) n.inputs.push_back(*bias);
  n.has_bias = bias.has_value();
  return push(std::move(n));
}

NodeId Graph::reshape(NodeId x, Shape per_sample) {
  Node n;
  n.kind = OpKind::kReshape;
  n.inputs = {x};
  n.per_sample = std::move(per_sample);
  return push(std::move(n));
}

NodeId Graph::relu(NodeId x) {
  Node n;
  n.kind = OpKind::kRelu;
  n.inputs = {x};
  return push(std::move(n));
}

NodeId Graph::tanh(NodeId x) {
  Node n;
  n.kind = OpKind::kTanh;
  n.inputs = {x};
  return push(std::move(n));
}

NodeId Graph::batchnorm3d(NodeId x, NodeId scale, NodeId shift,
                          NodeId running_mean, NodeId running_var,
                          BatchNormMode mode, double eps) {
  Node n;
  n.kind = OpKind::kBatchNorm3d;
  n.inputs = {x, scale, shift, running_mean, running_var};
  n.bn_mode = mode;
  n.bn_eps = eps;
  return push(std::move(n));
}

NodeId Graph::maxpool3d(NodeId x, std::size_t kernel) {
  if (kernel < 1) throw ShapeError("maxpool3d: kernel must be >= 1");
  Node n;
  n.kind = OpKind::kMaxPool3d;
  n.inputs = {x};
  n.window = kernel;
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kAdd;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kMul;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
  Node n;
  n.kind = OpKind::kSum;
  n.inputs = {x};
  return push(std::move(n));
}

NodeId Graph::squared_error(NodeId x, NodeId target) {
  Node n;
  n.kind = OpKind::kSquaredError;
  n.inputs = {x, target};
  return push(std::move(n));
}

const Node& Graph::node(NodeId id) const {
  if (id >= nodes_.size()) throw ShapeError("unknown node " + std::to_string(id));
  return nodes_[id];
}

std::optional<NodeId> Graph::find_leaf(std::string_view name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_leaf() && nodes_[i].name == name) {
      return static_cast<NodeId>(i);
    }
  }
  return std::nullopt;
}

Graph Graph::with_batchnorm_mode(BatchNormMode mode) const {
  Graph g = *this;
  for (Node& n : g.nodes_) {
    if (n.kind == OpKind::kBatchNorm3d) n.bn_mode = mode;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Bindings / values

template <typename T>
Bindings<T>& Bindings<T>::bind(NodeId id, const BasicTensor<T>& value) {
  for (auto& [node, ptr] : entries_) {
    if (node == id) {
      ptr = &value;
      return *this;
    }
  }
  entries_.emplace_back(id, &value);
  return *this;
}

template <typename T>
const BasicTensor<T>* Bindings<T>::find(NodeId id) const {
  for (const auto& [node, ptr] : entries_) {
    if (node == id) return ptr;
  }
  return nullptr;
}

template <typename T>
const BasicTensor<T>& Values<T>::operator[](NodeId id) const {
  if (!has(id)) {
    throw ShapeError("node " + std::to_string(id) + " has no forward value");
  }
  return values_[id];
}

template <typename T>
const BasicTensor<T>& GradMap<T>::operator[](NodeId id) const {
  if (!has(id)) throw ShapeError("no gradient for node " + std::to_string(id));
  return grads_[id];
}

// ---------------------------------------------------------------------------
// Forward

namespace {

std::vector<bool> ancestors(const Graph& graph, std::span<const NodeId> outputs) {
  std::vector<bool> needed(graph.size(), outputs.empty());
  for (NodeId o : outputs) needed.at(o) = true;
  for (std::size_t i = graph.size(); i-- > 0;) {
    if (!needed[i]) continue;
    for (NodeId in : graph.nodes()[i].inputs) needed[in] = true;
  }
  return needed;
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b,
                        const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": operand shapes " +
                     shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " differ");
  }
}

}  // namespace

template <typename T>
Values<T> forward(const Graph& graph, const Bindings<T>& bindings,
                  std::span<const NodeId> outputs) {
  Values<T> values(graph.size());
  const std::vector<bool> needed = ancestors(graph, outputs);
  const auto nodes = graph.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!needed[i]) continue;
    const Node& n = nodes[i];
    const NodeId id = static_cast<NodeId>(i);
    auto in = [&](std::size_t k) -> const BasicTensor<T>& {
      return values[n.inputs[k]];
    };
    BasicTensor<T> out;
    switch (n.kind) {
      case OpKind::kInput:
      case OpKind::kParameter: {
        const BasicTensor<T>* bound = bindings.find(id);
        if (bound == nullptr) throw ShapeError("unbound leaf '" + n.name + "'");
        out = *bound;
        break;
      }
      case OpKind::kConv3d:
        out = conv3d(in(0), in(1), n.has_bias ? &in(2) : nullptr, n.window);
        break;
      case OpKind::kDeconv3d:
        out = deconv3d(in(0), in(1), n.has_bias ? &in(2) : nullptr, n.window);
        break;
      case OpKind::kFullyConnected:
        out = fully_connected(in(0), in(1), n.has_bias ? &in(2) : nullptr);
        break;
      case OpKind::kReshape: {
        Shape s{in(0).dim(0)};
        s.insert(s.end(), n.per_sample.begin(), n.per_sample.end());
        out = in(0).reshaped(std::move(s));
        break;
      }
      case OpKind::kRelu: {
        out = in(0);
        for (T& v : out.data()) v = v > T{0} ? v : T{0};
        break;
      }
      case OpKind::kTanh: {
        out = in(0);
        for (T& v : out.data()) v = std::tanh(v);
        break;
      }
      case OpKind::kBatchNorm3d: {
        auto r = batchnorm3d(in(0), in(1), in(2), in(3), in(4), n.bn_mode, n.bn_eps);
        values.store_batch_stats(id, std::move(r.mean), std::move(r.var));
        out = std::move(r.y);
        break;
      }
      case OpKind::kMaxPool3d: {
        auto r = maxpool3d(in(0), n.window);
        values.store_argmax(id, std::move(r.argmax));
        out = std::move(r.y);
        break;
      }
      case OpKind::kAdd: {
        require_same_shape(in(0), in(1), "add");
        out = in(0);
        const auto b = in(1).data();
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += b[k];
        break;
      }
      case OpKind::kMul: {
        require_same_shape(in(0), in(1), "mul");
        out = in(0);
        const auto b = in(1).data();
        for (std::size_t k = 0; k < out.size(); ++k) out[k] *= b[k];
        break;
      }
      case OpKind::kSum: {
        double acc = 0.0;
        for (T v : in(0).data()) acc += v;
        out = BasicTensor<T>({1}, static_cast<T>(acc));
        break;
      }
      case OpKind::kSquaredError: {
        require_same_shape(in(0), in(1), "squared_error");
        double acc = 0.0;
        const auto a = in(0).data();
        const auto b = in(1).data();
        for (std::size_t k = 0; k < a.size(); ++k) {
          const double d = static_cast<double>(a[k]) - b[k];
          acc += d * d;
        }
        out = BasicTensor<T>({1}, static_cast<T>(acc));
        break;
      }
    }
    if (!out.all_finite()) {
      throw NonFiniteError(std::string("non-finite value produced by ") +
                           op_name(n.kind) + " node " + std::to_string(i) +
                           (n.name.empty() ? "" : " '" + n.name + "'"));
    }
    values.store(id, std::move(out));
  }
  return values;
}

// ---------------------------------------------------------------------------
// Backward

namespace {

template <typename T>
void accumulate(GradMap<T>& grads, NodeId id, BasicTensor<T> g) {
  BasicTensor<T>& slot = grads.slot(id);
  if (slot.empty()) {
    slot = std::move(g);
    return;
  }
  for (std::size_t k = 0; k < slot.size(); ++k) slot[k] += g[k];
}

}  // namespace

template <typename T>
GradMap<T> backward(const Graph& graph, const Values<T>& values, NodeId seed) {
  if (!values.has(seed)) {
    throw ShapeError("backward: seed node " + std::to_string(seed) +
                     " has no forward value");
  }
  if (values[seed].size() != 1) {
    throw ShapeError("backward: seed must be scalar, got shape " +
                     shape_string(values[seed].shape()));
  }
  GradMap<T> grads(graph.size());
  grads.slot(seed) = BasicTensor<T>(values[seed].shape(), T{1});
  const auto nodes = graph.nodes();
  for (std::size_t i = seed + 1; i-- > 0;) {
    const NodeId id = static_cast<NodeId>(i);
    if (!grads.has(id)) continue;
    const Node& n = nodes[i];
    const BasicTensor<T>& dy = grads[id];
    auto in = [&](std::size_t k) -> const BasicTensor<T>& {
      return values[n.inputs[k]];
    };
    switch (n.kind) {
      case OpKind::kInput:
      case OpKind::kParameter:
        break;
      case OpKind::kConv3d:
      case OpKind::kDeconv3d:
      case OpKind::kFullyConnected: {
        ConvGrads<T> g =
            n.kind == OpKind::kConv3d
                ? conv3d_backward(in(0), in(1), n.has_bias, n.window, dy)
            : n.kind == OpKind::kDeconv3d
                ? deconv3d_backward(in(0), in(1), n.has_bias, n.window, dy)
                : fully_connected_backward(in(0), in(1), n.has_bias, dy);
        accumulate(grads, n.inputs[0], std::move(g.dx));
        accumulate(grads, n.inputs[1], std::move(g.dw));
        if (n.has_bias) accumulate(grads, n.inputs[2], std::move(g.db));
        break;
      }
      case OpKind::kReshape:
        accumulate(grads, n.inputs[0], dy.reshaped(in(0).shape()));
        break;
      case OpKind::kRelu: {
        BasicTensor<T> dx = dy;
        const auto x = in(0).data();
        for (std::size_t k = 0; k < dx.size(); ++k) {
          if (!(x[k] > T{0})) dx[k] = T{0};
        }
        accumulate(grads, n.inputs[0], std::move(dx));
        break;
      }
      case OpKind::kTanh: {
        BasicTensor<T> dx = dy;
        const auto y = values[id].data();
        for (std::size_t k = 0; k < dx.size(); ++k) dx[k] *= T{1} - y[k] * y[k];
        accumulate(grads, n.inputs[0], std::move(dx));
        break;
      }
      case OpKind::kBatchNorm3d: {
        auto g = batchnorm3d_backward(in(0), in(1), values.batch_mean(id),
                                      values.batch_var(id), n.bn_mode, n.bn_eps, dy);
        accumulate(grads, n.inputs[0], std::move(g.dx));
        accumulate(grads, n.inputs[1], std::move(g.dgamma));
        accumulate(grads, n.inputs[2], std::move(g.dbeta));
        break;
      }
      case OpKind::kMaxPool3d:
        accumulate(grads, n.inputs[0],
                   maxpool3d_backward(in(0).shape(), values.argmax(id), dy));
        break;
      case OpKind::kAdd:
        accumulate(grads, n.inputs[0], dy);
        accumulate(grads, n.inputs[1], dy);
        break;
      case OpKind::kMul: {
        BasicTensor<T> da = dy, db = dy;
        const auto a = in(0).data();
        const auto b = in(1).data();
        for (std::size_t k = 0; k < dy.size(); ++k) {
          da[k] *= b[k];
          db[k] *= a[k];
        }
        accumulate(grads, n.inputs[0], std::move(da));
        accumulate(grads, n.inputs[1], std::move(db));
        break;
      }
      case OpKind::kSum:
        accumulate(grads, n.inputs[0], BasicTensor<T>(in(0).shape(), dy[0]));
        break;
      case OpKind::kSquaredError: {
        BasicTensor<T> dx = in(0);
        const auto t = in(1).data();
        for (std::size_t k = 0; k < dx.size(); ++k) {
          dx[k] = T{2} * (dx[k] - t[k]) * dy[0];
        }
        BasicTensor<T> dt = dx;
        for (T& v : dt.data()) v = -v;
        accumulate(grads, n.inputs[0], std::move(dx));
        accumulate(grads, n.inputs[1], std::move(dt));
        break;
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Finite differences

namespace {

TensorD central_differences(const Graph& graph, Bindings<double> promoted,
                            const TensorD& wrt_value, NodeId output, NodeId wrt,
                            double h) {
  if (!(h > 0.0)) throw ShapeError("finite_diff_grad: h must be positive");
  if (!graph.node(wrt).is_leaf()) {
    throw ShapeError("finite_diff_grad: can only differentiate w.r.t. a leaf");
  }
  TensorD probe = wrt_value;
  promoted.bind(wrt, probe);
  const NodeId outs[] = {output};
  auto eval = [&]() {
    Values<double> v = forward(graph, promoted, outs);
    if (v[output].size() != 1) {
      throw ShapeError("finite_diff_grad: output must be scalar");
    }
    return v[output][0];
  };
  TensorD grad(wrt_value.shape());
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const double x0 = probe[k];
    probe[k] = x0 + h;
    const double up = eval();
    probe[k] = x0 - h;
    const double down = eval();
    probe[k] = x0;
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace

TensorD finite_diff_grad(const Graph& graph, const Bindings<float>& bindings,
                         NodeId output, NodeId wrt, double h) {
  std::vector<TensorD> copies;
  std::vector<NodeId> ids;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const NodeId id = static_cast<NodeId>(i);
    if (const Tensor* t = bindings.find(id)) {
      copies.push_back(t->cast<double>());
      ids.push_back(id);
    }
  }
  Bindings<double> promoted;
  const TensorD* wrt_value = nullptr;
  for (std::size_t k = 0; k < copies.size(); ++k) {
    promoted.bind(ids[k], copies[k]);
    if (ids[k] == wrt) wrt_value = &copies[k];
  }
  if (wrt_value == nullptr) throw ShapeError("finite_diff_grad: wrt leaf is unbound");
  return central_differences(graph, promoted, *wrt_value, output, wrt, h);
}

TensorD finite_diff_grad(const Graph& graph, const Bindings<double>& bindings,
                         NodeId output, NodeId wrt, double h) {
  const TensorD* wrt_value = bindings.find(wrt);
  if (wrt_value == nullptr) throw ShapeError("finite_diff_grad: wrt leaf is unbound");
  return central_differences(graph, bindings, *wrt_value, output, wrt, h);
}

template class Bindings<float>;
template class Bindings<double>;
template class Values<float>;
template class Values<double>;
template class GradMap<float>;
template class GradMap<double>;
template Values<float> forward(const Graph&, const Bindings<float>&,
                               std::span<const NodeId>);
template Values<double> forward(const Graph&, const Bindings<double>&,
                                std::span<const NodeId>);
template GradMap<float> backward(const Graph&, const Values<float>&, NodeId);
template GradMap<double> backward(const Graph&, const Values<double>&, NodeId);

}  // namespace vebm
