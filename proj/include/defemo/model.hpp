#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "defemo/autodiff.hpp"
#include "defemo/tokenizer.hpp"

namespace defemo {

struct EncoderConfig {
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t hidden_dim = 64;
  std::size_t ff_dim = 128;
  std::size_t max_len = 64;
  std::size_t vocab_size = 0;
  std::size_t num_labels = 28;
  double dropout_rate = 0.1;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// Token sequences right-padded with PAD to a common length. Attention masking
// is driven by `lengths`, not by the id stored in padded slots.
struct EncodedBatch {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> segments;
  std::vector<std::size_t> lengths;
};

EncodedBatch pad_batch(std::span<const TokenSequence> seqs);

struct ForwardOptions {
  bool training = false;
  // Source of dropout seeds; required when training with dropout > 0.
  std::mt19937_64* rng = nullptr;
};

inline bool is_head_parameter(std::string_view name) { return name.starts_with("head."); }

// Shared transformer backbone with emotion, CDP and MLM heads. Parameters are
// kept in a fixed manifest order which is also the checkpoint order.
template <typename T>
class Model {
 public:
  // Weights ~ N(0, 0.02) truncated at 2 sigma, biases 0, layer-norm gain 1.
  explicit Model(const EncoderConfig& config);
  // Adopts existing values; names and shapes must match the manifest for
  // `config`.
  Model(const EncoderConfig& config, std::vector<Parameter<T>> params);

  Model(const Model&) = default;
  Model& operator=(const Model&) = default;
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const EncoderConfig& config() const { return config_; }

  std::vector<Parameter<T>>& parameters() { return params_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  Parameter<T>& parameter(std::string_view name);
  const Parameter<T>& parameter(std::string_view name) const;
  std::vector<Parameter<T>*> parameter_ptrs();

  template <typename U>
  Model<U> cast() const {
    std::vector<Parameter<U>> ps;
    ps.reserve(params_.size());
    for (const auto& p : params_) ps.push_back({p.name, p.value.template cast<U>()});
    return Model<U>(config_, std::move(ps));
  }

  // Hidden states [batch, seq, hidden].
  Var<T> encode(Graph<T>& g, const EncodedBatch& batch, const ForwardOptions& opts) const;
  // tanh(W h[CLS] + b): [batch, hidden].
  Var<T> pool(Graph<T>& g, Var<T> hidden) const;
  // Dropout (training only) then dense: [batch, num_labels].
  Var<T> emotion_logits(Graph<T>& g, Var<T> pooled, const ForwardOptions& opts) const;
  // [batch, 2]; column 1 is IsDefinition.
  Var<T> cdp_logits(Graph<T>& g, Var<T> pooled) const;
  // Rows of `hidden` at flattened positions b * seq_len + i: [positions, vocab].
  Var<T> mlm_logits(Graph<T>& g, Var<T> hidden, std::span<const std::size_t> flat_positions) const;

  // Ordered (name, shape) manifest for a config.
  static std::vector<std::pair<std::string, Shape>> manifest(const EncoderConfig& config);

 private:
  Var<T> p(Graph<T>& g, std::string_view name) const;
  Var<T> linear(Graph<T>& g, Var<T> x, std::string_view prefix) const;

  void build_index();

  EncoderConfig config_;
  std::vector<Parameter<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Deterministic init for one manifest entry.
template <typename T>
Tensor<T> init_tensor(std::string_view name, const Shape& shape, std::mt19937_64& rng);

template <typename T>
Model<T> init_parameters(const EncoderConfig& config) {
  return Model<T>(config);
}

// Mean sigmoid BCE over [batch, labels] with 0/1 targets.
template <typename T>
Var<T> emotion_loss(Var<T> logits, const Tensor<T>& targets);
// Mean CE; targets 1 = IsDefinition, 0 = IsNotDefinition.
template <typename T>
Var<T> cdp_loss(Var<T> logits, std::span<const std::int64_t> targets);
// Mean CE over masked positions.
template <typename T>
Var<T> mlm_loss(Var<T> logits, std::span<const std::int64_t> targets);
template <typename T>
Var<T> combined_loss(Var<T> cdp, Var<T> mlm, double cdp_weight = 1.0, double mlm_weight = 1.0);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace defemo
