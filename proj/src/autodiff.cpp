#include "defemo/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "defemo/error.hpp"

namespace defemo {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Constant: return "constant";
    case OpKind::Parameter: return "parameter";
    case OpKind::Matmul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::EmbeddingGather: return "embedding_gather";
    case OpKind::LayerNorm: return "layer_norm";
    case OpKind::Softmax: return "softmax";
    case OpKind::Gelu: return "gelu";
    case OpKind::Tanh: return "tanh";
    case OpKind::Dropout: return "dropout";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Scale: return "scale";
    case OpKind::Transpose: return "transpose";
    case OpKind::Reshape: return "reshape";
    case OpKind::CrossEntropyWithLogits: return "cross_entropy_with_logits";
    case OpKind::BinaryCrossEntropyWithLogits: return "binary_cross_entropy_with_logits";
    case OpKind::Mean: return "mean";
    case OpKind::Sum: return "sum";
  }
  return "unknown";
}

// ---- Gradients --------------------------------------------------------------

template <typename T>
Tensor<T> Gradients<T>::of(const Parameter<T>& p) const {
  for (const auto& e : entries_) {
    if (e.param == &p) return e.grad;
  }
  return Tensor<T>(p.value.shape);
}

template <typename T>
bool Gradients<T>::contains(const Parameter<T>& p) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.param == &p; });
}

template <typename T>
bool Gradients<T>::reached(const Parameter<T>& p) const {
  for (const auto& e : entries_) {
    if (e.param == &p) return e.reached;
  }
  return false;
}

template <typename T>
double Gradients<T>::global_norm() const {
  double acc = 0.0;
  for (const auto& e : entries_) {
    for (auto v : e.grad.data) acc += static_cast<double>(v) * static_cast<double>(v);
  }
  return std::sqrt(acc);
}

// ---- Graph ------------------------------------------------------------------

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value in constant node " + std::to_string(nodes_.size()));
  }
  nodes_.push_back(Node{OpKind::Constant, {}, std::move(value), {}, nullptr, false});
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::param(const Parameter<T>& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var<T>(this, it->second);
  if (!p.value.all_finite()) throw NumericError("non-finite value in parameter '" + p.name + "'");
  nodes_.push_back(Node{OpKind::Parameter, {}, p.value, {}, &p, true});
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::record(OpKind kind, std::vector<std::size_t> inputs, Tensor<T> value,
                        BackwardFn fn) {
  const std::size_t id = nodes_.size();
  if (!value.all_finite()) {
    std::string msg = "non-finite output from " + std::string(op_name(kind)) + " at node " +
                      std::to_string(id) + " (shape " + shape_str(value.shape) + ", inputs";
    for (auto in : inputs) {
      msg += " #" + std::to_string(in) + ":" + std::string(op_name(nodes_[in].kind));
    }
    throw NumericError(msg + ")");
  }
  bool needs = false;
  for (auto in : inputs) needs = needs || nodes_.at(in).requires_grad;
  if (!needs) fn = nullptr;
  nodes_.push_back(Node{kind, std::move(inputs), std::move(value), std::move(fn), nullptr, needs});
  return Var<T>(this, id);
}

template <typename T>
Tensor<T>* Graph<T>::grad_slot(std::size_t id) {
  if (!nodes_[id].requires_grad) return nullptr;
  auto& slot = grads_[id];
  if (!slot) slot.emplace(nodes_[id].value.shape);
  return &*slot;
}

template <typename T>
Gradients<T> Graph<T>::backward(Var<T> loss) {
  if (&loss.graph() != this) throw Error("backward: loss belongs to a different graph");
  const auto& lv = nodes_.at(loss.id()).value;
  if (lv.size() != 1) throw ShapeError("backward: loss must be scalar, got shape " + shape_str(lv.shape));

  grads_.assign(nodes_.size(), std::nullopt);
  if (nodes_[loss.id()].requires_grad) grads_[loss.id()].emplace(lv.shape, T{1});

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    if (!grads_[i] || !nodes_[i].backward) continue;
    // Rules only write into slots of earlier nodes.
    nodes_[i].backward(*this, *grads_[i]);
    grads_[i].reset();
  }

  Gradients<T> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind != OpKind::Parameter) continue;
    auto* p = nodes_[i].param;
    if (grads_[i]) {
      out.entries_.push_back({p, std::move(*grads_[i]), true});
    } else {
      out.entries_.push_back({p, Tensor<T>(p->value.shape), false});
    }
  }
  grads_.clear();
  return out;
}

// ---- helpers ------------------------------------------------------------------

namespace {

template <typename T>
void check_same_graph(const Var<T>& a, const Var<T>& b, OpKind kind) {
  if (&a.graph() != &b.graph()) {
    throw Error(std::string(op_name(kind)) + ": operands belong to different graphs");
  }
}

[[noreturn]] void shape_fail(OpKind kind, const std::string& detail) {
  throw ShapeError(std::string(op_name(kind)) + ": " + detail);
}

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      T* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
std::vector<T> transposed(const T* src, std::size_t rows, std::size_t cols) {
  std::vector<T> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  return out;
}

std::vector<std::size_t> row_major_strides(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= 0) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

}  // namespace

// ---- matmul -------------------------------------------------------------------

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  check_same_graph(a, b, OpKind::Matmul);
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2) {
    shape_fail(OpKind::Matmul, "operands must have rank >= 2, got " + shape_str(as) + " and " + shape_str(bs));
  }
  const std::size_t m = as[as.size() - 2];
  const std::size_t k = as.back();
  const std::size_t n = bs.back();
  if (bs[bs.size() - 2] != k) {
    shape_fail(OpKind::Matmul, "inner dimensions differ: " + shape_str(as) + " x " + shape_str(bs));
  }
  const bool shared_b = bs.size() == 2;
  if (!shared_b && (bs.size() != as.size() || !std::equal(as.begin(), as.end() - 2, bs.begin()))) {
    shape_fail(OpKind::Matmul, "batch dimensions differ: " + shape_str(as) + " x " + shape_str(bs));
  }
  const std::size_t batch = numel(Shape(as.begin(), as.end() - 2));

  Shape out_shape(as.begin(), as.end() - 1);
  out_shape.push_back(n);
  Tensor<T> out(out_shape);
  const T* ad = a.value().data.data();
  const T* bd = b.value().data.data();
  if (shared_b) {
    gemm_nn(batch * m, n, k, ad, bd, out.data.data());
  } else {
    for (std::size_t i = 0; i < batch; ++i) {
      gemm_nn(m, n, k, ad + i * m * k, bd + i * k * n, out.data.data() + i * m * n);
    }
  }

  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(OpKind::Matmul, {ia, ib}, std::move(out),
                          [=](Graph<T>& g, const Tensor<T>& go) {
    const T* A = g.value(ia).data.data();
    const T* B = g.value(ib).data.data();
    const T* G = go.data.data();
    if (auto* ga = g.grad_slot(ia)) {
      if (shared_b) {
        auto bt = transposed(B, k, n);
        gemm_nn(batch * m, k, n, G, bt.data(), ga->data.data());
      } else {
        for (std::size_t i = 0; i < batch; ++i) {
          auto bt = transposed(B + i * k * n, k, n);
          gemm_nn(m, k, n, G + i * m * n, bt.data(), ga->data.data() + i * m * k);
        }
      }
    }
    if (auto* gb = g.grad_slot(ib)) {
      if (shared_b) {
        gemm_tn(batch * m, n, k, A, G, gb->data.data());
      } else {
        for (std::size_t i = 0; i < batch; ++i) {
          gemm_tn(m, n, k, A + i * m * k, G + i * m * n, gb->data.data() + i * k * n);
        }
      }
    }
  });
}

// ---- add ----------------------------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  check_same_graph(a, b, OpKind::Add);
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (bs.size() > as.size()) {
    shape_fail(OpKind::Add, "cannot broadcast " + shape_str(bs) + " to " + shape_str(as));
  }
  Shape padded(as.size() - bs.size(), 1);
  padded.insert(padded.end(), bs.begin(), bs.end());
  for (std::size_t d = 0; d < as.size(); ++d) {
    if (padded[d] != as[d] && padded[d] != 1) {
      shape_fail(OpKind::Add, "cannot broadcast " + shape_str(bs) + " to " + shape_str(as));
    }
  }
  const std::size_t total = numel(as);
  const std::size_t bsize = numel(bs);

  // b index for each element of a; empty when b is a suffix of a.
  std::vector<std::size_t> index_map;
  bool suffix = true;
  {
    bool leading = true;
    for (std::size_t d = 0; d < as.size(); ++d) {
      if (leading && padded[d] == 1 && as[d] != 1) continue;
      leading = false;
      if (padded[d] != as[d]) suffix = false;
    }
  }
  if (!suffix) {
    auto bstr = row_major_strides(padded);
    for (std::size_t d = 0; d < as.size(); ++d) {
      if (padded[d] == 1) bstr[d] = 0;
    }
    index_map.resize(total);
    std::vector<std::size_t> idx(as.size(), 0);
    std::size_t boff = 0;
    for (std::size_t i = 0; i < total; ++i) {
      index_map[i] = boff;
      for (std::size_t d = as.size(); d-- > 0;) {
        ++idx[d];
        boff += bstr[d];
        if (idx[d] < as[d]) break;
        boff -= bstr[d] * idx[d];
        idx[d] = 0;
      }
    }
  }

  Tensor<T> out(as);
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  if (suffix) {
    for (std::size_t i = 0; i < total; ++i) out.data[i] = av[i] + bv[i % bsize];
  } else {
    for (std::size_t i = 0; i < total; ++i) out.data[i] = av[i] + bv[index_map[i]];
  }

  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(OpKind::Add, {ia, ib}, std::move(out),
                          [=, map = std::move(index_map)](Graph<T>& g, const Tensor<T>& go) {
    if (auto* ga = g.grad_slot(ia)) {
      for (std::size_t i = 0; i < total; ++i) ga->data[i] += go.data[i];
    }
    if (auto* gb = g.grad_slot(ib)) {
      if (map.empty()) {
        for (std::size_t i = 0; i < total; ++i) gb->data[i % bsize] += go.data[i];
      } else {
        for (std::size_t i = 0; i < total; ++i) gb->data[map[i]] += go.data[i];
      }
    }
  });
}

// ---- embedding_gather ---------------------------------------------------------

template <typename T>
Var<T> embedding_gather(Var<T> table, std::span<const std::size_t> ids) {
  const Shape& ts = table.shape();
  if (ts.size() != 2) shape_fail(OpKind::EmbeddingGather, "table must be rank 2, got " + shape_str(ts));
  if (ids.empty()) shape_fail(OpKind::EmbeddingGather, "empty id list");
  const std::size_t rows = ts[0], dim = ts[1];
  for (auto id : ids) {
    if (id >= rows) {
      shape_fail(OpKind::EmbeddingGather,
                 "id " + std::to_string(id) + " out of range for table " + shape_str(ts));
    }
  }
  Tensor<T> out({ids.size(), dim});
  const auto& tv = table.value().data;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::copy_n(tv.begin() + ids[r] * dim, dim, out.data.begin() + r * dim);
  }
  const std::size_t it = table.id();
  return table.graph().record(OpKind::EmbeddingGather, {it}, std::move(out),
                              [=, idx = std::vector<std::size_t>(ids.begin(), ids.end())](
                                  Graph<T>& g, const Tensor<T>& go) {
    if (auto* gt = g.grad_slot(it)) {
      for (std::size_t r = 0; r < idx.size(); ++r) {
        T* dst = gt->data.data() + idx[r] * dim;
        const T* src = go.data.data() + r * dim;
        for (std::size_t j = 0; j < dim; ++j) dst[j] += src[j];
      }
    }
  });
}

// ---- layer_norm ---------------------------------------------------------------

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, double eps) {
  check_same_graph(x, gain, OpKind::LayerNorm);
  check_same_graph(x, bias, OpKind::LayerNorm);
  const Shape& xs = x.shape();
  if (xs.empty()) shape_fail(OpKind::LayerNorm, "input must have rank >= 1");
  const std::size_t d = xs.back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    shape_fail(OpKind::LayerNorm, "gain/bias must be [" + std::to_string(d) + "], got " +
                                      shape_str(gain.shape()) + " and " + shape_str(bias.shape()));
  }
  const std::size_t rows = numel(xs) / d;
  const auto& xv = x.value().data;
  const auto& gv = gain.value().data;
  const auto& bv = bias.value().data;
  std::vector<T> xhat(xv.size());
  std::vector<T> inv_std(rows);
  Tensor<T> out(xs);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * d;
    T mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    const T is = T{1} / std::sqrt(var + static_cast<T>(eps));
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mu) * is;
      xhat[r * d + j] = h;
      out.data[r * d + j] = gv[j] * h + bv[j];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.graph().record(OpKind::LayerNorm, {ix, ig, ib}, std::move(out),
                          [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                              Graph<T>& g, const Tensor<T>& go) {
    const auto& gv = g.value(ig).data;
    if (auto* gg = g.grad_slot(ig)) {
      for (std::size_t i = 0; i < go.size(); ++i) gg->data[i % d] += go.data[i] * xhat[i];
    }
    if (auto* gb = g.grad_slot(ib)) {
      for (std::size_t i = 0; i < go.size(); ++i) gb->data[i % d] += go.data[i];
    }
    if (auto* gx = g.grad_slot(ix)) {
      const T dn = static_cast<T>(d);
      std::vector<T> dxhat(d);
      for (std::size_t r = 0; r < rows; ++r) {
        T s1 = 0, s2 = 0;
        for (std::size_t j = 0; j < d; ++j) {
          dxhat[j] = go.data[r * d + j] * gv[j];
          s1 += dxhat[j];
          s2 += dxhat[j] * xhat[r * d + j];
        }
        for (std::size_t j = 0; j < d; ++j) {
          gx->data[r * d + j] += inv_std[r] / dn * (dn * dxhat[j] - s1 - xhat[r * d + j] * s2);
        }
      }
    }
  });
}

// ---- softmax ------------------------------------------------------------------

template <typename T>
Var<T> softmax(Var<T> x) {
  const Shape& xs = x.shape();
  if (xs.empty()) shape_fail(OpKind::Softmax, "input must have rank >= 1");
  const std::size_t d = xs.back();
  const std::size_t rows = numel(xs) / d;
  Tensor<T> out(xs);
  const auto& xv = x.value().data;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * d;
    T* o = out.data.data() + r * d;
    const T mx = *std::max_element(row, row + d);
    T z = 0;
    for (std::size_t j = 0; j < d; ++j) {
      o[j] = std::exp(row[j] - mx);
      z += o[j];
    }
    for (std::size_t j = 0; j < d; ++j) o[j] /= z;
  }
  const std::size_t ix = x.id();
  const std::size_t self = x.graph().size();
  return x.graph().record(OpKind::Softmax, {ix}, std::move(out),
                          [=](Graph<T>& g, const Tensor<T>& go) {
    auto* gx = g.grad_slot(ix);
    if (!gx) return;
    const auto& y = g.value(self).data;
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (std::size_t j = 0; j < d; ++j) dot += go.data[r * d + j] * y[r * d + j];
      for (std::size_t j = 0; j < d; ++j) {
        gx->data[r * d + j] += y[r * d + j] * (go.data[r * d + j] - dot);
      }
    }
  });
}

// ---- elementwise ----------------------------------------------------------------

template <typename T>
Var<T> gelu(Var<T> x) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const T k = static_cast<T>(0.044715);
  Tensor<T> out(x.shape());
  const auto& xv = x.value().data;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const T v = xv[i];
    out.data[i] = T{0.5} * v * (T{1} + std::tanh(c * (v + k * v * v * v)));
  }
  const std::size_t ix = x.id();
  return x.graph().record(OpKind::Gelu, {ix}, std::move(out), [=](Graph<T>& g, const Tensor<T>& go) {
    auto* gx = g.grad_slot(ix);
    if (!gx) return;
    const auto& xv = g.value(ix).data;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const T v = xv[i];
      const T t = std::tanh(c * (v + k * v * v * v));
      const T dt = (T{1} - t * t) * c * (T{1} + T{3} * k * v * v);
      gx->data[i] += go.data[i] * (T{0.5} * (T{1} + t) + T{0.5} * v * dt);
    }
  });
}

template <typename T>
Var<T> tanh(Var<T> x) {
  Tensor<T> out(x.shape());
  const auto& xv = x.value().data;
  for (std::size_t i = 0; i < xv.size(); ++i) out.data[i] = std::tanh(xv[i]);
  const std::size_t ix = x.id();
  const std::size_t self = x.graph().size();
  return x.graph().record(OpKind::Tanh, {ix}, std::move(out), [=](Graph<T>& g, const Tensor<T>& go) {
    auto* gx = g.grad_slot(ix);
    if (!gx) return;
    const auto& y = g.value(self).data;
    for (std::size_t i = 0; i < y.size(); ++i) gx->data[i] += go.data[i] * (T{1} - y[i] * y[i]);
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Tensor<T> out(x.shape());
  const auto& xv = x.value().data;
  for (std::size_t i = 0; i < xv.size(); ++i) out.data[i] = stable_sigmoid(xv[i]);
  const std::size_t ix = x.id();
  const std::size_t self = x.graph().size();
  return x.graph().record(OpKind::Sigmoid, {ix}, std::move(out), [=](Graph<T>& g, const Tensor<T>& go) {
    auto* gx = g.grad_slot(ix);
    if (!gx) return;
    const auto& y = g.value(self).data;
    for (std::size_t i = 0; i < y.size(); ++i) gx->data[i] += go.data[i] * y[i] * (T{1} - y[i]);
  });
}

template <typename T>
Var<T> dropout(Var<T> x, double rate, std::optional<std::uint64_t> seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    shape_fail(OpKind::Dropout, "rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (rate == 0.0) return x;
  std::mt19937_64 rng(seed ? *seed : (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^
                                         std::random_device{}());
  std::bernoulli_distribution keep(1.0 - rate);
  const T kept = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(x.value().size());
  for (auto& m : mask) m = keep(rng) ? kept : T{0};
  Tensor<T> out(x.shape());
  const auto& xv = x.value().data;
  for (std::size_t i = 0; i < xv.size(); ++i) out.data[i] = xv[i] * mask[i];
  const std::size_t ix = x.id();
  return x.graph().record(OpKind::Dropout, {ix}, std::move(out),
                          [=, mask = std::move(mask)](Graph<T>& g, const Tensor<T>& go) {
    if (auto* gx = g.grad_slot(ix)) {
      for (std::size_t i = 0; i < mask.size(); ++i) gx->data[i] += go.data[i] * mask[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> x, double factor) {
  const T f = static_cast<T>(factor);
  Tensor<T> out(x.shape());
  const auto& xv = x.value().data;
  for (std::size_t i = 0; i < xv.size(); ++i) out.data[i] = xv[i] * f;
  const std::size_t ix = x.id();
  return x.graph().record(OpKind::Scale, {ix}, std::move(out), [=](Graph<T>& g, const Tensor<T>& go) {
    if (auto* gx = g.grad_slot(ix)) {
      for (std::size_t i = 0; i < go.size(); ++i) gx->data[i] += go.data[i] * f;
    }
  });
}

// ---- structural ---------------------------------------------------------------

template <typename T>
Var<T> concat(std::span<const Var<T>> xs, std::size_t axis) {
  if (xs.empty()) shape_fail(OpKind::Concat, "no inputs");
  const Shape& s0 = xs[0].shape();
  if (axis >= s0.size()) shape_fail(OpKind::Concat, "axis " + std::to_string(axis) + " out of range for " + shape_str(s0));
  std::size_t total_axis = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> extents;
  for (const auto& v : xs) {
    check_same_graph(xs[0], v, OpKind::Concat);
    const Shape& s = v.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == s0[d];
    if (!ok) shape_fail(OpKind::Concat, "incompatible shapes " + shape_str(s0) + " and " + shape_str(s));
    total_axis += s[axis];
    ids.push_back(v.id());
    extents.push_back(s[axis]);
  }
  const std::size_t outer = numel(Shape(s0.begin(), s0.begin() + axis));
  const std::size_t inner = numel(Shape(s0.begin() + axis + 1, s0.end()));
  Shape out_shape = s0;
  out_shape[axis] = total_axis;
  Tensor<T> out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& src = xs[k].value().data;
    const std::size_t block = extents[k] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src.begin() + o * block, block, out.data.begin() + o * total_axis * inner + offset);
    }
    offset += block;
  }
  return xs[0].graph().record(OpKind::Concat, ids, std::move(out),
                              [=](Graph<T>& g, const Tensor<T>& go) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t block = extents[k] * inner;
      if (auto* gx = g.grad_slot(ids[k])) {
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t j = 0; j < block; ++j) {
            gx->data[o * block + j] += go.data[o * total_axis * inner + off + j];
          }
        }
      }
      off += block;
    }
  });
}

template <typename T>
Var<T> slice(Var<T> x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& xs = x.shape();
  if (axis >= xs.size() || begin >= end || end > xs[axis]) {
    shape_fail(OpKind::Slice, "invalid range [" + std::to_string(begin) + "," + std::to_string(end) +
                                  ") on axis " + std::to_string(axis) + " of " + shape_str(xs));
  }
  const std::size_t outer = numel(Shape(xs.begin(), xs.begin() + axis));
  const std::size_t inner = numel(Shape(xs.begin() + axis + 1, xs.end()));
  const std::size_t src_block = xs[axis] * inner;
  const std::size_t dst_block = (end - begin) * inner;
  Shape out_shape = xs;
  out_shape[axis] = end - begin;
  Tensor<T> out(out_shape);
  const auto& xv = x.value().data;
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.begin() + o * src_block + begin * inner, dst_block, out.data.begin() + o * dst_block);
  }
  const std::size_t ix = x.id();
  return x.graph().record(OpKind::Slice, {ix}, std::move(out), [=](Graph<T>& g, const Tensor<T>& go) {
    if (auto* gx = g.grad_slot(ix)) {
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t j = 0; j < dst_block; ++j) {
          gx->data[o * src_block + begin * inner + j] += go.data[o * dst_block + j];
        }
      }
    }
  });
}

template <typename T>
Var<T> transpose(Var<T> x, std::span<const std::size_t> perm) {
  const Shape& xs = x.shape();
  const std::size_t r = xs.size();
  std::vector<bool> seen(r, false);
  bool ok = perm.size() == r;
  for (std::size_t i = 0; ok && i < r; ++i) {
    ok = perm[i] < r && !seen[perm[i]];
    if (ok) seen[perm[i]] = true;
  }
  if (!ok) shape_fail(OpKind::Transpose, "invalid permutation for " + shape_str(xs));

  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = xs[perm[i]];
  const auto in_str = row_major_strides(xs);
  // Source offset for each output element.
  std::vector<std::size_t> src_stride(r);
  for (std::size_t i = 0; i < r; ++i) src_stride[i] = in_str[perm[i]];
  const std::size_t total = numel(xs);
  std::vector<std::size_t> map(total);
  std::vector<std::size_t> idx(r, 0);
  std::size_t off = 0;
  for (std::size_t i = 0; i < total; ++i) {
    map[i] = off;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      off += src_stride[d];
      if (idx[d] < out_shape[d]) break;
      off -= src_stride[d] * idx[d];
      idx[d] = 0;
    }
  }
  Tensor<T> out(out_shape);
  const auto& xv = x.value().data;
  for (std::size_t i = 0; i < total; ++i) out.data[i] = xv[map[i]];
  const std::size_t ix = x.id();
  return x.graph().record(OpKind::Transpose, {ix}, std::move(out),
                          [=, map = std::move(map)](Graph<T>& g, const Tensor<T>& go) {
    if (auto* gx = g.grad_slot(ix)) {
      for (std::size_t i = 0; i < map.size(); ++i) gx->data[map[i]] += go.data[i];
    }
  });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  if (numel(shape) != x.value().size()) {
    shape_fail(OpKind::Reshape, "cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  Tensor<T> out(std::move(shape), x.value().data);
  const std::size_t ix = x.id();
  return x.graph().record(OpKind::Reshape, {ix}, std::move(out), [=](Graph<T>& g, const Tensor<T>& go) {
    if (auto* gx = g.grad_slot(ix)) {
      for (std::size_t i = 0; i < go.size(); ++i) gx->data[i] += go.data[i];
    }
  });
}

// ---- losses and reductions ----------------------------------------------------------

template <typename T>
Var<T> cross_entropy_with_logits(Var<T> logits, std::span<const std::int64_t> targets) {
  const Shape& ls = logits.shape();
  if (ls.size() != 2 || ls[0] != targets.size()) {
    shape_fail(OpKind::CrossEntropyWithLogits,
               "logits " + shape_str(ls) + " vs " + std::to_string(targets.size()) + " targets");
  }
  const std::size_t n = ls[0], c = ls[1];
  std::size_t counted = 0;
  for (auto t : targets) {
    if (t == -1) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= c) {
      shape_fail(OpKind::CrossEntropyWithLogits,
                 "target " + std::to_string(t) + " out of range for " + std::to_string(c) + " classes");
    }
    ++counted;
  }
  const auto& lv = logits.value().data;
  std::vector<T> probs(n * c, T{0});
  T total = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] == -1) continue;
    const T* row = lv.data() + r * c;
    const T mx = *std::max_element(row, row + c);
    T z = 0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[r * c + j] = std::exp(row[j] - mx);
      z += probs[r * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[r * c + j] /= z;
    total += -(row[targets[r]] - mx - std::log(z));
  }
  const T denom = counted ? static_cast<T>(counted) : T{1};
  auto out = Tensor<T>::scalar(total / denom);
  const std::size_t il = logits.id();
  return logits.graph().record(
      OpKind::CrossEntropyWithLogits, {il}, std::move(out),
      [=, probs = std::move(probs), tg = std::vector<std::int64_t>(targets.begin(), targets.end())](
          Graph<T>& g, const Tensor<T>& go) {
        auto* gl = g.grad_slot(il);
        if (!gl) return;
        const T s = go.data[0] / denom;
        for (std::size_t r = 0; r < n; ++r) {
          if (tg[r] == -1) continue;
          for (std::size_t j = 0; j < c; ++j) {
            const T onehot = static_cast<std::int64_t>(j) == tg[r] ? T{1} : T{0};
            gl->data[r * c + j] += s * (probs[r * c + j] - onehot);
          }
        }
      });
}

template <typename T>
Var<T> binary_cross_entropy_with_logits(Var<T> logits, const Tensor<T>& targets) {
  if (logits.shape() != targets.shape) {
    shape_fail(OpKind::BinaryCrossEntropyWithLogits,
               "logits " + shape_str(logits.shape()) + " vs targets " + shape_str(targets.shape));
  }
  const auto& xv = logits.value().data;
  const std::size_t n = xv.size();
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T x = xv[i];
    total += std::max(x, T{0}) - x * targets.data[i] + std::log1p(std::exp(-std::abs(x)));
  }
  auto out = Tensor<T>::scalar(total / static_cast<T>(n));
  const std::size_t il = logits.id();
  return logits.graph().record(OpKind::BinaryCrossEntropyWithLogits, {il}, std::move(out),
                               [=, tv = targets.data](Graph<T>& g, const Tensor<T>& go) {
    auto* gl = g.grad_slot(il);
    if (!gl) return;
    const auto& xv = g.value(il).data;
    const T s = go.data[0] / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) gl->data[i] += s * (stable_sigmoid(xv[i]) - tv[i]);
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  T total = 0;
  for (auto v : x.value().data) total += v;
  const std::size_t ix = x.id();
  return x.graph().record(OpKind::Sum, {ix}, Tensor<T>::scalar(total), [=](Graph<T>& g, const Tensor<T>& go) {
    if (auto* gx = g.grad_slot(ix)) {
      for (auto& v : gx->data) v += go.data[0];
    }
  });
}

template <typename T>
Var<T> mean(Var<T> x) {
  const std::size_t n = x.value().size();
  T total = 0;
  for (auto v : x.value().data) total += v;
  const std::size_t ix = x.id();
  return x.graph().record(OpKind::Mean, {ix}, Tensor<T>::scalar(total / static_cast<T>(n)),
                          [=](Graph<T>& g, const Tensor<T>& go) {
    if (auto* gx = g.grad_slot(ix)) {
      const T s = go.data[0] / static_cast<T>(n);
      for (auto& v : gx->data) v += s;
    }
  });
}

// ---- explicit instantiation -----------------------------------------------------------

#define DEFEMO_INSTANTIATE(T)                                                                     \
  template class Gradients<T>;                                                                    \
  template class Graph<T>;                                                                        \
  template Var<T> matmul(Var<T>, Var<T>);                                                         \
  template Var<T> add(Var<T>, Var<T>);                                                            \
  template Var<T> embedding_gather(Var<T>, std::span<const std::size_t>);                         \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, double);                                     \
  template Var<T> softmax(Var<T>);                                                                \
  template Var<T> gelu(Var<T>);                                                                   \
  template Var<T> tanh(Var<T>);                                                                   \
  template Var<T> dropout(Var<T>, double, std::optional<std::uint64_t>);                          \
  template Var<T> sigmoid(Var<T>);                                                                \
  template Var<T> concat(std::span<const Var<T>>, std::size_t);                                   \
  template Var<T> slice(Var<T>, std::size_t, std::size_t, std::size_t);                           \
  template Var<T> scale(Var<T>, double);                                                          \
  template Var<T> transpose(Var<T>, std::span<const std::size_t>);                                \
  template Var<T> reshape(Var<T>, Shape);                                                         \
  template Var<T> cross_entropy_with_logits(Var<T>, std::span<const std::int64_t>);               \
  template Var<T> binary_cross_entropy_with_logits(Var<T>, const Tensor<T>&);                     \
  template Var<T> mean(Var<T>);                                                                   \
  template Var<T> sum(Var<T>);

DEFEMO_INSTANTIATE(float)
DEFEMO_INSTANTIATE(double)

#undef DEFEMO_INSTANTIATE

}  // namespace defemo
