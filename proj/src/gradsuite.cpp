#include "defemo/gradsuite.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <random>

#include "defemo/gradcheck.hpp"
#include "defemo/model.hpp"

namespace defemo {

namespace {

using Rng64 = std::mt19937_64;

Tensor<double> random_tensor(const Shape& shape, Rng64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(shape);
  for (auto& v : t.data) v = u(rng);
  return t;
}

// sum(out * w) for a fixed random w.
Var<double> weighted_sum(Var<double> out, const Tensor<double>& w) {
  auto& g = out.graph();
  const std::size_t n = out.value().size();
  return sum(matmul(reshape(out, {1, n}), g.constant(Tensor<double>({n, 1}, w.data))));
}

struct Case {
  std::string name;
  std::vector<Parameter<double>> params;
  std::function<Var<double>(std::vector<Var<double>>&)> body;
};

GradcheckResult check_case(Case& c, std::uint64_t seed, double eps) {
  Rng64 rng(seed);
  std::size_t out_n = 0;
  {
    Graph<double> g;
    std::vector<Var<double>> vs;
    for (auto& p : c.params) vs.push_back(g.param(p));
    out_n = c.body(vs).value().size();
  }
  const auto w = random_tensor({out_n}, rng);
  std::vector<Parameter<double>*> ptrs;
  for (auto& p : c.params) ptrs.push_back(&p);
  auto builder = [&](Graph<double>& g) {
    std::vector<Var<double>> vs;
    for (auto& p : c.params) vs.push_back(g.param(p));
    auto out = c.body(vs);
    return out.value().size() == 1 && out.shape().empty() ? out : weighted_sum(out, w);
  };
  return finite_difference_gradcheck(ptrs, builder, eps);
}

Parameter<double> param(std::string name, Tensor<double> t) { return {std::move(name), std::move(t)}; }

std::vector<Case> primitive_cases(Rng64& r) {
  std::uniform_int_distribution<std::size_t> dim(1, 4), last(1, 5);
  auto shape_of_rank = [&](std::size_t rank) {
    Shape s;
    for (std::size_t i = 0; i + 1 < rank; ++i) s.push_back(dim(r));
    s.push_back(last(r));
    return s;
  };
  std::vector<Case> cases;
  {
    const std::size_t m = dim(r), k = last(r), n = last(r), bt = dim(r);
    cases.push_back({"matmul", {param("a", random_tensor({m, k}, r)), param("b", random_tensor({k, n}, r))},
                     [](auto& v) { return matmul(v[0], v[1]); }});
    cases.push_back({"matmul_batched",
                     {param("a", random_tensor({bt, m, k}, r)), param("b", random_tensor({bt, k, n}, r))},
                     [](auto& v) { return matmul(v[0], v[1]); }});
    cases.push_back({"matmul_shared_rhs",
                     {param("a", random_tensor({bt, m, k}, r)), param("b", random_tensor({k, n}, r))},
                     [](auto& v) { return matmul(v[0], v[1]); }});
  }
  {
    const Shape s = shape_of_rank(3);
    cases.push_back({"add", {param("a", random_tensor(s, r)), param("b", random_tensor(s, r))},
                     [](auto& v) { return add(v[0], v[1]); }});
    cases.push_back({"add_bias", {param("a", random_tensor(s, r)), param("b", random_tensor({s.back()}, r))},
                     [](auto& v) { return add(v[0], v[1]); }});
    const Shape s4{dim(r), 2, dim(r), last(r)};
    cases.push_back({"add_broadcast",
                     {param("a", random_tensor(s4, r)), param("b", random_tensor({s4[0], 1, 1, s4[3]}, r))},
                     [](auto& v) { return add(v[0], v[1]); }});
  }
  {
    const std::size_t rows = dim(r) + 1, d = last(r);
    std::vector<std::size_t> ids = {0, rows - 1, 0, rows / 2};
    cases.push_back({"embedding_gather", {param("t", random_tensor({rows, d}, r))},
                     [ids](auto& v) { return embedding_gather(v[0], std::span<const std::size_t>(ids)); }});
  }
  {
    const Shape s{dim(r), last(r) + 1};
    cases.push_back({"layer_norm",
                     {param("x", random_tensor(s, r)), param("g", random_tensor({s[1]}, r, 0.5, 1.5)),
                      param("b", random_tensor({s[1]}, r))},
                     [](auto& v) { return layer_norm(v[0], v[1], v[2]); }});
  }
  const Shape s = shape_of_rank(2);
  cases.push_back({"softmax", {param("x", random_tensor(s, r, -2, 2))}, [](auto& v) { return softmax(v[0]); }});
  cases.push_back({"gelu", {param("x", random_tensor(s, r, -3, 3))}, [](auto& v) { return gelu(v[0]); }});
  cases.push_back({"tanh", {param("x", random_tensor(s, r, -2, 2))}, [](auto& v) { return defemo::tanh(v[0]); }});
  cases.push_back({"sigmoid", {param("x", random_tensor(s, r, -4, 4))}, [](auto& v) { return sigmoid(v[0]); }});
  cases.push_back({"dropout", {param("x", random_tensor(s, r))}, [](auto& v) { return dropout(v[0], 0.3, 99u); }});
  cases.push_back({"scale", {param("x", random_tensor(s, r))}, [](auto& v) { return scale(v[0], -1.7); }});
  cases.push_back({"concat", {param("a", random_tensor({s[0], 2}, r)), param("b", random_tensor({s[0], 3}, r))},
                   [](auto& v) {
                     std::vector<Var<double>> xs{v[0], v[1]};
                     return concat(std::span<const Var<double>>(xs), 1);
                   }});
  cases.push_back({"slice", {param("x", random_tensor({s[0], 5}, r))}, [](auto& v) { return slice(v[0], 1, 1, 4); }});
  {
    const Shape s3 = shape_of_rank(3);
    cases.push_back({"transpose", {param("x", random_tensor(s3, r))}, [](auto& v) {
                       static const std::size_t perm[] = {2, 0, 1};
                       return transpose(v[0], std::span<const std::size_t>(perm));
                     }});
  }
  cases.push_back({"reshape", {param("x", random_tensor(s, r))},
                   [](auto& v) { return reshape(v[0], {numel(v[0].shape())}); }});
  {
    const std::size_t n = dim(r), c = last(r) + 1;
    std::vector<std::int64_t> targets;
    std::uniform_int_distribution<std::int64_t> t(0, static_cast<std::int64_t>(c) - 1);
    for (std::size_t i = 0; i < n; ++i) targets.push_back(i == 0 && n > 1 ? -1 : t(r));
    cases.push_back({"cross_entropy", {param("z", random_tensor({n, c}, r, -2, 2))}, [targets](auto& v) {
                       return cross_entropy_with_logits(v[0], std::span<const std::int64_t>(targets));
                     }});
    Tensor<double> bt({n, c});
    std::bernoulli_distribution coin(0.5);
    for (auto& x : bt.data) x = coin(r) ? 1.0 : 0.0;
    cases.push_back({"binary_cross_entropy", {param("z", random_tensor({n, c}, r, -3, 3))},
                     [bt](auto& v) { return binary_cross_entropy_with_logits(v[0], bt); }});
  }
  cases.push_back({"mean", {param("x", random_tensor(s, r))}, [](auto& v) { return mean(v[0]); }});
  cases.push_back({"sum", {param("x", random_tensor(s, r))}, [](auto& v) { return sum(v[0]); }});
  return cases;
}

SuiteEntry named(std::string name) {
  SuiteEntry e;
  e.name = std::move(name);
  return e;
}

void absorb(SuiteEntry& e, const GradcheckResult& r) {
  if (r.max_rel_error >= e.max_rel_error) {
    e.max_rel_error = r.max_rel_error;
    e.worst_param = r.worst_param;
  }
  e.elements_checked += r.elements_checked;
  e.max_abs_analytic = std::max(e.max_abs_analytic, r.max_abs_analytic);
  e.max_abs_numeric = std::max(e.max_abs_numeric, r.max_abs_numeric);
}

}  // namespace

std::vector<SuiteEntry> primitive_gradcheck_suite(const SuiteOptions& options) {
  Rng64 rng(options.seed);
  std::vector<SuiteEntry> entries;
  std::map<std::string, std::size_t> index;
  for (std::size_t trial = 0; trial < options.primitive_trials; ++trial) {
    const std::uint64_t seed = rng();
    Rng64 r(seed);
    for (auto& c : primitive_cases(r)) {
      auto [it, fresh] = index.emplace(c.name, entries.size());
      if (fresh) entries.push_back(named(c.name));
      absorb(entries[it->second], check_case(c, seed, options.eps));
    }
  }
  return entries;
}

std::vector<SuiteEntry> encoder_gradcheck_suite(const SuiteOptions& options) {
  EncoderConfig config;
  config.num_layers = 1;
  config.num_heads = 2;
  config.hidden_dim = 8;
  config.ff_dim = 16;
  config.max_len = 8;
  config.vocab_size = 20;
  config.num_labels = 3;
  config.dropout_rate = 0.1;
  config.seed = options.seed;
  Model<double> model(config);
  // Spread the weights so gradients sit well above the relative-error floor.
  Rng64 rng(options.seed + 1);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (auto& p : model.parameters()) {
    for (auto& v : p.value.data) v += noise(rng);
  }

  // One single-segment and one padded pair sequence.
  const std::vector<TokenSequence> seqs = {{{2, 5, 7, 3, 9, 12}, {0, 0, 0, 0, 1, 1}, 3, 2},
                                           {{2, 11, 3, 6}, {0, 0, 0, 1}, 1, 1}};
  const auto batch = pad_batch(seqs);
  const Tensor<double> emotion_targets({2, 3}, {1, 0, 1, 0, 1, 0});
  const std::vector<std::int64_t> cdp_targets = {1, 0};
  const std::vector<std::size_t> mlm_positions = {1, 4, batch.seq_len + 2};
  const std::vector<std::int64_t> mlm_targets = {5, 9, 6};

  enum class Loss { Emotion, Cdp, Mlm, Combined };
  auto builder_for = [&](Loss which) {
    return [&, which](Graph<double>& g) {
      Rng64 dropout_rng(options.seed + 7);
      const ForwardOptions train_mode{true, &dropout_rng};
      auto hidden = model.encode(g, batch, train_mode);
      auto pooled = model.pool(g, hidden);
      auto cdp = [&] { return cdp_loss(model.cdp_logits(g, pooled), std::span<const std::int64_t>(cdp_targets)); };
      auto mlm = [&] {
        return mlm_loss(model.mlm_logits(g, hidden, mlm_positions), std::span<const std::int64_t>(mlm_targets));
      };
      switch (which) {
        case Loss::Emotion: return emotion_loss(model.emotion_logits(g, pooled, train_mode), emotion_targets);
        case Loss::Cdp: return cdp();
        case Loss::Mlm: return mlm();
        case Loss::Combined: break;
      }
      return combined_loss(cdp(), mlm());
    };
  };

  // Key biases shift every score in a softmax row equally, so their exact
  // gradient is zero and only roundoff remains numerically.
  auto is_key_bias = [](const std::string& name) { return name.ends_with("attn.key.bias"); };
  std::vector<Parameter<double>*> regular, key_bias;
  for (auto* p : model.parameter_ptrs()) (is_key_bias(p->name) ? key_bias : regular).push_back(p);

  std::vector<SuiteEntry> entries;
  const std::pair<const char*, Loss> losses[] = {{"encoder.emotion_loss", Loss::Emotion},
                                                 {"encoder.cdp_loss", Loss::Cdp},
                                                 {"encoder.mlm_loss", Loss::Mlm},
                                                 {"encoder.cdp_mlm_loss", Loss::Combined}};
  for (const auto& [name, which] : losses) {
    const LossBuilder builder = builder_for(which);
    SuiteEntry e = named(name);
    absorb(e, finite_difference_gradcheck(regular, builder, options.eps));
    entries.push_back(e);
    SuiteEntry z = named(std::string(name) + ".key_bias");
    z.structural_zero = true;
    absorb(z, finite_difference_gradcheck(key_bias, builder, options.eps));
    entries.push_back(z);
  }
  return entries;
}

bool entry_passes(const SuiteEntry& e, const SuiteOptions& options) {
  if (e.structural_zero) {
    return e.max_abs_analytic < options.zero_analytic_bound && e.max_abs_numeric < options.zero_numeric_bound;
  }
  return e.max_rel_error < options.tolerance;
}

nlohmann::json suite_to_json(const std::vector<SuiteEntry>& entries, const SuiteOptions& options) {
  nlohmann::json rows = nlohmann::json::array();
  double worst = 0.0;
  bool all = true;
  for (const auto& e : entries) {
    const bool ok = entry_passes(e, options);
    all = all && ok;
    nlohmann::json row = {{"name", e.name}, {"passed", ok}, {"elements", e.elements_checked}};
    if (e.structural_zero) {
      row["max_abs_analytic"] = e.max_abs_analytic;
      row["max_abs_numeric"] = e.max_abs_numeric;
    } else {
      row["max_rel_error"] = e.max_rel_error;
      row["worst_param"] = e.worst_param;
      worst = std::max(worst, e.max_rel_error);
    }
    rows.push_back(row);
  }
  return {{"eps", options.eps},         {"tolerance", options.tolerance}, {"max_rel_error", worst},
          {"passed", all},              {"checks", rows}};
}

}  // namespace defemo
