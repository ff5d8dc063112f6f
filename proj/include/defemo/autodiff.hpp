#pragma once

// Tape-based reverse-mode automatic differentiation over dense tensors.
//
// A Graph records every primitive as it is evaluated. Node ids are assigned in
// creation order and a node may only consume earlier nodes, so the tape is
// acyclic and reverse id order is a valid reverse topological order.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "defemo/tensor.hpp"

namespace defemo {

enum class OpKind {
  Constant,
  Parameter,
  Matmul,
  Add,
  EmbeddingGather,
  LayerNorm,
  Softmax,
  Gelu,
  Tanh,
  Dropout,
  Sigmoid,
  Concat,
  Slice,
  Scale,
  Transpose,
  Reshape,
  CrossEntropyWithLogits,
  BinaryCrossEntropyWithLogits,
  Mean,
  Sum,
};

std::string_view op_name(OpKind kind);

// A learnable tensor owned outside the graph. The graph refers to it by
// address, so parameters must outlive every graph that uses them.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

template <typename T>
class Graph;

template <typename T>
class Var {
 public:
  Var() = default;

  Graph<T>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape; }

 private:
  friend class Graph<T>;
  Var(Graph<T>* g, std::size_t id) : graph_(g), id_(id) {}

  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Result of a backward pass: one gradient per parameter used by the graph.
// Parameters present in the graph but not on a path to the loss get zeros.
template <typename T>
class Gradients {
 public:
  struct Entry {
    const Parameter<T>* param;
    Tensor<T> grad;
    bool reached;
  };

  const std::vector<Entry>& entries() const { return entries_; }

  // Zero tensor when `p` never entered the graph.
  Tensor<T> of(const Parameter<T>& p) const;
  bool contains(const Parameter<T>& p) const;
  bool reached(const Parameter<T>& p) const;

  double global_norm() const;

 private:
  friend class Graph<T>;
  std::vector<Entry> entries_;
};

template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& grad_out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value);
  // Repeated calls with the same parameter return the same node.
  Var<T> param(const Parameter<T>& p);

  // Appends a computed node. Throws NumericError if `value` is not finite.
  Var<T> record(OpKind kind, std::vector<std::size_t> inputs, Tensor<T> value, BackwardFn fn);

  Gradients<T> backward(Var<T> loss);

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }
  std::size_t size() const { return nodes_.size(); }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // During backward: gradient accumulator for node `id`, or nullptr when the
  // node does not need a gradient.
  Tensor<T>* grad_slot(std::size_t id);

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    Tensor<T> value;
    BackwardFn backward;
    const Parameter<T>* param = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> param_nodes_;
  std::vector<std::optional<Tensor<T>>> grads_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph_->value(id_);
}

// ---- primitives -----------------------------------------------------------

// a [..., m, k] x b [..., k, n]. Leading dims must match, or b is rank 2 and
// shared across a's leading dims.
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);

// a + b where b broadcasts to a's shape (numpy rules, b extents 1 or equal).
template <typename T>
Var<T> add(Var<T> a, Var<T> b);

// Rows of `table` [n, d] selected by `ids`; result [ids.size(), d].
template <typename T>
Var<T> embedding_gather(Var<T> table, std::span<const std::size_t> ids);

// Normalizes over the last axis then applies gain and bias of shape [d].
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, double eps = 1e-5);

template <typename T>
Var<T> softmax(Var<T> x);

// tanh approximation.
template <typename T>
Var<T> gelu(Var<T> x);

template <typename T>
Var<T> tanh(Var<T> x);

// Inverted dropout. With no seed the mask is drawn from std::random_device.
template <typename T>
Var<T> dropout(Var<T> x, double rate, std::optional<std::uint64_t> seed);

template <typename T>
Var<T> sigmoid(Var<T> x);

template <typename T>
Var<T> concat(std::span<const Var<T>> xs, std::size_t axis);

// x[begin:end] along `axis`.
template <typename T>
Var<T> slice(Var<T> x, std::size_t axis, std::size_t begin, std::size_t end);

template <typename T>
Var<T> scale(Var<T> x, double factor);

// Axis permutation: out.shape[i] = x.shape[perm[i]].
template <typename T>
Var<T> transpose(Var<T> x, std::span<const std::size_t> perm);

template <typename T>
Var<T> reshape(Var<T> x, Shape shape);

// Mean softmax cross-entropy over rows of logits [n, c]. A target of -1 marks
// an ignored row: it contributes neither loss nor gradient.
template <typename T>
Var<T> cross_entropy_with_logits(Var<T> logits, std::span<const std::int64_t> targets);

// Mean over all elements of the numerically stable sigmoid BCE.
template <typename T>
Var<T> binary_cross_entropy_with_logits(Var<T> logits, const Tensor<T>& targets);

template <typename T>
Var<T> mean(Var<T> x);

template <typename T>
Var<T> sum(Var<T> x);

}  // namespace defemo
