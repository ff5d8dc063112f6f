#include "defemo/model.hpp"

#include <cmath>

#include "defemo/error.hpp"

namespace defemo {

void EncoderConfig::validate() const {
  if (num_layers < 1) throw ConfigError("encoder: num_layers must be >= 1");
  if (num_heads < 1 || hidden_dim < 1 || hidden_dim % num_heads != 0) {
    throw ConfigError("encoder: hidden_dim (" + std::to_string(hidden_dim) + ") must be divisible by num_heads (" +
                      std::to_string(num_heads) + ")");
  }
  if (ff_dim < 1) throw ConfigError("encoder: ff_dim must be >= 1");
  if (max_len < 3) throw ConfigError("encoder: max_len must be >= 3");
  if (vocab_size <= static_cast<std::size_t>(kNumSpecial)) {
    throw ConfigError("encoder: vocab_size must exceed the 5 special tokens");
  }
  if (num_labels < 2) throw ConfigError("encoder: num_labels must be >= 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("encoder: dropout_rate must be in [0, 1)");
}

EncodedBatch pad_batch(std::span<const TokenSequence> seqs) {
  if (seqs.empty()) throw ShapeError("pad_batch: empty batch");
  EncodedBatch b;
  b.batch = seqs.size();
  for (const auto& s : seqs) {
    if (s.ids.empty()) throw ShapeError("pad_batch: empty sequence");
    if (s.segment_ids.size() != s.ids.size()) throw ShapeError("pad_batch: segment ids length mismatch");
    b.seq_len = std::max(b.seq_len, s.ids.size());
  }
  b.ids.assign(b.batch * b.seq_len, static_cast<std::size_t>(kPadId));
  b.segments.assign(b.batch * b.seq_len, 0);
  for (std::size_t i = 0; i < b.batch; ++i) {
    const auto& s = seqs[i];
    for (std::size_t j = 0; j < s.ids.size(); ++j) {
      b.ids[i * b.seq_len + j] = static_cast<std::size_t>(s.ids[j]);
      b.segments[i * b.seq_len + j] = static_cast<std::size_t>(s.segment_ids[j]);
    }
    b.lengths.push_back(s.ids.size());
  }
  return b;
}

// ---- parameters -------------------------------------------------------------------

template <typename T>
Tensor<T> init_tensor(std::string_view name, const Shape& shape, std::mt19937_64& rng) {
  if (name.ends_with(".gain")) return Tensor<T>(shape, T{1});
  if (name.ends_with(".bias")) return Tensor<T>(shape, T{0});
  constexpr double kStd = 0.02;
  std::normal_distribution<double> normal(0.0, kStd);
  Tensor<T> t(shape);
  for (auto& v : t.data) {
    double x;
    do {
      x = normal(rng);
    } while (std::abs(x) > 2.0 * kStd);
    v = static_cast<T>(x);
  }
  return t;
}

template <typename T>
std::vector<std::pair<std::string, Shape>> Model<T>::manifest(const EncoderConfig& c) {
  const std::size_t h = c.hidden_dim;
  std::vector<std::pair<std::string, Shape>> m = {
      {"embeddings.token", {c.vocab_size, h}},
      {"embeddings.position", {c.max_len, h}},
      {"embeddings.segment", {2, h}},
      {"embeddings.ln.gain", {h}},
      {"embeddings.ln.bias", {h}},
  };
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const std::string pre = "encoder.layer" + std::to_string(l) + ".";
    for (const char* proj : {"query", "key", "value", "output"}) {
      m.push_back({pre + "attn." + proj + ".weight", {h, h}});
      m.push_back({pre + "attn." + proj + ".bias", {h}});
    }
    m.push_back({pre + "attn.ln.gain", {h}});
    m.push_back({pre + "attn.ln.bias", {h}});
    m.push_back({pre + "ffn.in.weight", {h, c.ff_dim}});
    m.push_back({pre + "ffn.in.bias", {c.ff_dim}});
    m.push_back({pre + "ffn.out.weight", {c.ff_dim, h}});
    m.push_back({pre + "ffn.out.bias", {h}});
    m.push_back({pre + "ffn.ln.gain", {h}});
    m.push_back({pre + "ffn.ln.bias", {h}});
  }
  m.push_back({"pooler.weight", {h, h}});
  m.push_back({"pooler.bias", {h}});
  m.push_back({"head.emotion.weight", {h, c.num_labels}});
  m.push_back({"head.emotion.bias", {c.num_labels}});
  m.push_back({"head.cdp.weight", {h, 2}});
  m.push_back({"head.cdp.bias", {2}});
  m.push_back({"head.mlm.weight", {h, c.vocab_size}});
  m.push_back({"head.mlm.bias", {c.vocab_size}});
  return m;
}

template <typename T>
Model<T>::Model(const EncoderConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  for (auto& [name, shape] : manifest(config_)) {
    params_.push_back({name, init_tensor<T>(name, shape, rng)});
  }
  build_index();
}

template <typename T>
Model<T>::Model(const EncoderConfig& config, std::vector<Parameter<T>> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  const auto m = manifest(config_);
  if (m.size() != params_.size()) {
    throw ShapeError("model: expected " + std::to_string(m.size()) + " parameters, got " +
                     std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (params_[i].name != m[i].first || params_[i].value.shape != m[i].second) {
      throw ShapeError("model: parameter " + std::to_string(i) + " is '" + params_[i].name + "' " +
                       shape_str(params_[i].value.shape) + ", expected '" + m[i].first + "' " +
                       shape_str(m[i].second));
    }
  }
  build_index();
}

template <typename T>
void Model<T>::build_index() {
  index_.clear();
  for (std::size_t i = 0; i < params_.size(); ++i) index_.emplace(params_[i].name, i);
}

template <typename T>
Parameter<T>& Model<T>::parameter(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw Error("model: no parameter named '" + std::string(name) + "'");
  return params_[it->second];
}

template <typename T>
const Parameter<T>& Model<T>::parameter(std::string_view name) const {
  return const_cast<Model*>(this)->parameter(name);
}

template <typename T>
std::vector<Parameter<T>*> Model<T>::parameter_ptrs() {
  std::vector<Parameter<T>*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

// ---- forward ------------------------------------------------------------------------

template <typename T>
Var<T> Model<T>::p(Graph<T>& g, std::string_view name) const {
  return g.param(parameter(name));
}

template <typename T>
Var<T> Model<T>::linear(Graph<T>& g, Var<T> x, std::string_view prefix) const {
  const std::string pre(prefix);
  return add(matmul(x, p(g, pre + ".weight")), p(g, pre + ".bias"));
}

namespace {

template <typename T>
Var<T> maybe_dropout(Var<T> x, double rate, const ForwardOptions& opts) {
  if (!opts.training || rate == 0.0) return x;
  if (!opts.rng) throw ConfigError("training forward with dropout requires an rng");
  return dropout(x, rate, (*opts.rng)());
}

}  // namespace

template <typename T>
Var<T> Model<T>::encode(Graph<T>& g, const EncodedBatch& batch, const ForwardOptions& opts) const {
  const std::size_t b = batch.batch, s = batch.seq_len, h = config_.hidden_dim;
  const std::size_t heads = config_.num_heads, dh = h / heads;
  if (s > config_.max_len) {
    throw ShapeError("encode: sequence length " + std::to_string(s) + " exceeds max_len " +
                     std::to_string(config_.max_len));
  }
  if (batch.ids.size() != b * s || batch.segments.size() != b * s || batch.lengths.size() != b) {
    throw ShapeError("encode: malformed batch");
  }

  std::vector<std::size_t> positions(s);
  for (std::size_t i = 0; i < s; ++i) positions[i] = i;

  auto x = reshape(embedding_gather(p(g, "embeddings.token"), std::span<const std::size_t>(batch.ids)), {b, s, h});
  x = add(x, embedding_gather(p(g, "embeddings.position"), std::span<const std::size_t>(positions)));
  x = add(x, reshape(embedding_gather(p(g, "embeddings.segment"), std::span<const std::size_t>(batch.segments)),
                     {b, s, h}));
  x = layer_norm(x, p(g, "embeddings.ln.gain"), p(g, "embeddings.ln.bias"));
  x = maybe_dropout(x, config_.dropout_rate, opts);

  Tensor<T> mask_values({b, 1, 1, s});
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = batch.lengths[i]; j < s; ++j) mask_values.data[i * s + j] = static_cast<T>(-1e9);
  }
  auto mask = g.constant(std::move(mask_values));

  static constexpr std::size_t kSplitHeads[] = {0, 2, 1, 3};
  static constexpr std::size_t kSplitHeadsT[] = {0, 2, 3, 1};
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  auto flat = reshape(x, {b * s, h});
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string pre = "encoder.layer" + std::to_string(l) + ".";
    auto q = transpose(reshape(linear(g, flat, pre + "attn.query"), {b, s, heads, dh}),
                       std::span<const std::size_t>(kSplitHeads));
    auto k = transpose(reshape(linear(g, flat, pre + "attn.key"), {b, s, heads, dh}),
                       std::span<const std::size_t>(kSplitHeadsT));
    auto v = transpose(reshape(linear(g, flat, pre + "attn.value"), {b, s, heads, dh}),
                       std::span<const std::size_t>(kSplitHeads));
    auto scores = add(scale(matmul(q, k), inv_sqrt), mask);
    auto ctx = matmul(softmax(scores), v);
    ctx = reshape(transpose(ctx, std::span<const std::size_t>(kSplitHeads)), {b * s, h});
    auto attn = maybe_dropout(linear(g, ctx, pre + "attn.output"), config_.dropout_rate, opts);
    flat = layer_norm(add(flat, attn), p(g, pre + "attn.ln.gain"), p(g, pre + "attn.ln.bias"));

    auto ff = linear(g, gelu(linear(g, flat, pre + "ffn.in")), pre + "ffn.out");
    ff = maybe_dropout(ff, config_.dropout_rate, opts);
    flat = layer_norm(add(flat, ff), p(g, pre + "ffn.ln.gain"), p(g, pre + "ffn.ln.bias"));
  }
  return reshape(flat, {b, s, h});
}

template <typename T>
Var<T> Model<T>::pool(Graph<T>& g, Var<T> hidden) const {
  const auto& hs = hidden.shape();
  if (hs.size() != 3) throw ShapeError("pool: expected [batch, seq, hidden], got " + shape_str(hs));
  auto cls = reshape(slice(hidden, 1, 0, 1), {hs[0], hs[2]});
  return tanh(linear(g, cls, "pooler"));
}

template <typename T>
Var<T> Model<T>::emotion_logits(Graph<T>& g, Var<T> pooled, const ForwardOptions& opts) const {
  return linear(g, maybe_dropout(pooled, config_.dropout_rate, opts), "head.emotion");
}

template <typename T>
Var<T> Model<T>::cdp_logits(Graph<T>& g, Var<T> pooled) const {
  return linear(g, pooled, "head.cdp");
}

template <typename T>
Var<T> Model<T>::mlm_logits(Graph<T>& g, Var<T> hidden, std::span<const std::size_t> flat_positions) const {
  if (flat_positions.empty()) throw ShapeError("mlm_logits: no masked positions");
  const auto& hs = hidden.shape();
  if (hs.size() != 3) throw ShapeError("mlm_logits: expected [batch, seq, hidden], got " + shape_str(hs));
  auto rows = embedding_gather(reshape(hidden, {hs[0] * hs[1], hs[2]}), flat_positions);
  return linear(g, rows, "head.mlm");
}

// ---- losses ----------------------------------------------------------------------------

template <typename T>
Var<T> emotion_loss(Var<T> logits, const Tensor<T>& targets) {
  return binary_cross_entropy_with_logits(logits, targets);
}

template <typename T>
Var<T> cdp_loss(Var<T> logits, std::span<const std::int64_t> targets) {
  if (logits.shape().size() != 2 || logits.shape()[1] != 2) {
    throw ShapeError("cdp_loss: expected [batch, 2] logits, got " + shape_str(logits.shape()));
  }
  return cross_entropy_with_logits(logits, targets);
}

template <typename T>
Var<T> mlm_loss(Var<T> logits, std::span<const std::int64_t> targets) {
  return cross_entropy_with_logits(logits, targets);
}

template <typename T>
Var<T> combined_loss(Var<T> cdp, Var<T> mlm, double cdp_weight, double mlm_weight) {
  if (cdp_weight != 1.0) cdp = scale(cdp, cdp_weight);
  if (mlm_weight != 1.0) mlm = scale(mlm, mlm_weight);
  return add(cdp, mlm);
}

#define DEFEMO_INSTANTIATE(T)                                                            \
  template class Model<T>;                                                               \
  template Tensor<T> init_tensor<T>(std::string_view, const Shape&, std::mt19937_64&);   \
  template Var<T> emotion_loss(Var<T>, const Tensor<T>&);                                \
  template Var<T> cdp_loss(Var<T>, std::span<const std::int64_t>);                       \
  template Var<T> mlm_loss(Var<T>, std::span<const std::int64_t>);                       \
  template Var<T> combined_loss(Var<T>, Var<T>, double, double);

DEFEMO_INSTANTIATE(float)
DEFEMO_INSTANTIATE(double)

#undef DEFEMO_INSTANTIATE

}  // namespace defemo
