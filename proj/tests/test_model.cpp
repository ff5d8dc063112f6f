#include <doctest.h>

#include <cmath>
#include <random>

#include "defemo/error.hpp"
#include "defemo/gradsuite.hpp"
#include "defemo/model.hpp"

using namespace defemo;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.num_layers = 2;
  c.num_heads = 2;
  c.hidden_dim = 16;
  c.ff_dim = 32;
  c.max_len = 16;
  c.vocab_size = 30;
  c.num_labels = 4;
  c.seed = 11;
  return c;
}

TokenSequence seq_of(std::vector<TokenId> ids) {
  TokenSequence s;
  s.ids = std::move(ids);
  s.segment_ids.assign(s.ids.size(), 0);
  s.text_len = s.ids.size() - 1;
  return s;
}

Tensor<double> eval_hidden(const Model<double>& m, const EncodedBatch& b) {
  Graph<double> g;
  return m.encode(g, b, {}).value();
}

}  // namespace

TEST_CASE("config validation") {
  auto c = tiny_config();
  CHECK_NOTHROW(c.validate());
  c.num_heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  c.max_len = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  c.num_labels = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(Model<float>{c}, ConfigError);
}

TEST_CASE("initialization") {
  const auto c = tiny_config();
  const Model<float> a(c), b(c);
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    CHECK(a.parameters()[i].value == b.parameters()[i].value);
    const auto& p = a.parameters()[i];
    if (p.name.ends_with(".bias")) {
      for (float v : p.value.data) CHECK(v == 0.0f);
    } else if (p.name.ends_with(".gain")) {
      for (float v : p.value.data) CHECK(v == 1.0f);
    } else {
      for (float v : p.value.data) CHECK(std::abs(v) <= 0.04f);
    }
  }
  auto c2 = c;
  c2.seed = 12;
  CHECK(Model<float>(c2).parameter("pooler.weight").value != a.parameter("pooler.weight").value);

  EncoderConfig big = c;
  big.hidden_dim = 256;
  big.num_heads = 4;
  big.num_layers = 1;
  const Model<double> m(big);
  const auto& w = m.parameter("encoder.layer0.attn.query.weight").value;
  REQUIRE(w.size() == 256 * 256);
  double s = 0, s2 = 0;
  for (double v : w.data) {
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(w.size());
  const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
  CHECK(sd == doctest::Approx(0.02).epsilon(0.2));
}

TEST_CASE("encode contracts") {
  const Model<double> m(tiny_config());
  SUBCASE("identical sequences give identical rows") {
    const std::vector<TokenSequence> seqs = {seq_of({kClsId, 7, 8, 9}), seq_of({kClsId, 7, 8, 9})};
    const auto b = pad_batch(seqs);
    const auto h = eval_hidden(m, b);
    const std::size_t row = 4 * 16;
    for (std::size_t i = 0; i < row; ++i) CHECK(h[i] == h[row + i]);
  }
  SUBCASE("pad ids do not leak into real positions") {
    const std::vector<TokenSequence> seqs = {seq_of({kClsId, 7, 8, 9, 10}), seq_of({kClsId, 12})};
    auto b = pad_batch(seqs);
    CHECK(b.seq_len == 5);
    CHECK(b.lengths[1] == 2);
    const auto h1 = eval_hidden(m, b);
    for (std::size_t t = 2; t < 5; ++t) b.ids[5 + t] = 20 + t;
    const auto h2 = eval_hidden(m, b);
    for (std::size_t t = 0; t < 2; ++t) {
      for (std::size_t d = 0; d < 16; ++d) CHECK(h1[(5 + t) * 16 + d] == h2[(5 + t) * 16 + d]);
    }
  }
  SUBCASE("eval mode is deterministic") {
    const Model<float> mf(tiny_config());
    const auto b = pad_batch(std::vector<TokenSequence>{seq_of({kClsId, 7, 8})});
    Graph<float> g1, g2;
    CHECK(mf.encode(g1, b, {}).value() == mf.encode(g2, b, {}).value());
  }
  SUBCASE("overlong sequences are rejected") {
    std::vector<TokenId> ids(17, 9);
    ids[0] = kClsId;
    const auto b = pad_batch(std::vector<TokenSequence>{seq_of(ids)});
    Graph<double> g;
    CHECK_THROWS_AS(m.encode(g, b, {}), ShapeError);
  }
  SUBCASE("training with dropout needs an rng") {
    const auto b = pad_batch(std::vector<TokenSequence>{seq_of({kClsId, 7})});
    Graph<double> g;
    CHECK_THROWS_AS(m.encode(g, b, {.training = true}), ConfigError);
  }
}

TEST_CASE("pooler and heads") {
  Model<double> m(tiny_config());
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 1.0);
  Tensor<double> hidden({2, 5, 16});
  for (auto& v : hidden.data) v = nd(rng);

  Graph<double> g;
  const auto pooled = m.pool(g, g.constant(hidden));
  CHECK(pooled.shape() == Shape{2, 16});
  for (double v : pooled.value().data) CHECK(std::abs(v) < 1.0);

  auto perturbed = hidden;
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t i = 16; i < 5 * 16; ++i) perturbed[b * 80 + i] += 1.0;
  }
  Graph<double> g2;
  CHECK(m.pool(g2, g2.constant(perturbed)).value() == pooled.value());

  for (auto& v : m.parameter("pooler.weight").value.data) v = 0.0;
  for (std::size_t i = 0; i < 16; ++i) m.parameter("pooler.bias").value[i] = 0.1 * static_cast<double>(i);
  Graph<double> g3;
  const auto pz = m.pool(g3, g3.constant(hidden));
  for (std::size_t i = 0; i < 16; ++i) CHECK(pz.value()[16 + i] == std::tanh(0.1 * static_cast<double>(i)));

  for (auto& v : m.parameter("head.emotion.weight").value.data) v = 0.0;
  for (std::size_t i = 0; i < 4; ++i) m.parameter("head.emotion.bias").value[i] = static_cast<double>(i);
  const auto logits = m.emotion_logits(g3, pz, {});
  CHECK(logits.shape() == Shape{2, 4});
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t i = 0; i < 4; ++i) CHECK(logits.value()[r * 4 + i] == static_cast<double>(i));
  }
  CHECK(m.cdp_logits(g3, pz).shape() == Shape{2, 2});

  Graph<double> g4;
  const std::vector<std::size_t> pos = {2, 7};
  Tensor<double> one({1, 8, 16});
  CHECK(m.mlm_logits(g4, g4.constant(one), pos).shape() == Shape{2, 30});
  CHECK_THROWS_AS(m.mlm_logits(g4, g4.constant(one), std::vector<std::size_t>{}), ShapeError);
}

TEST_CASE("task losses on known inputs") {
  Graph<double> g;
  const auto e = emotion_loss(g.constant(Tensor<double>({2, 3}, 0.0)), Tensor<double>({2, 3}, 0.0));
  CHECK(e.value().item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  const std::vector<std::int64_t> one = {1};
  const auto c = cdp_loss(g.constant(Tensor<double>({1, 2}, 0.0)), std::span<const std::int64_t>(one));
  CHECK(c.value().item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  const std::vector<std::int64_t> tgt = {3};
  const auto l = mlm_loss(g.constant(Tensor<double>({1, 10}, 0.5)), std::span<const std::int64_t>(tgt));
  CHECK(l.value().item() == doctest::Approx(std::log(10.0)).epsilon(1e-14));

  const auto sum = combined_loss(c, l);
  CHECK(sum.value().item() == c.value().item() + l.value().item());

  CHECK_THROWS_AS(emotion_loss(g.constant(Tensor<double>({2, 3}, 0.0)), Tensor<double>({3, 2}, 0.0)), ShapeError);
  CHECK_THROWS_AS(cdp_loss(g.constant(Tensor<double>({2, 2}, 0.0)), std::span<const std::int64_t>(one)), ShapeError);
}

TEST_CASE("cast round trip and manifest") {
  const Model<float> m(tiny_config());
  const auto back = m.cast<double>().cast<float>();
  for (std::size_t i = 0; i < m.parameters().size(); ++i) CHECK(back.parameters()[i].value == m.parameters()[i].value);
  const auto man = Model<float>::manifest(tiny_config());
  CHECK(man.size() == m.parameters().size());
  CHECK(man.front().first == "embeddings.token");
  CHECK(man.back().first == "head.mlm.bias");
  CHECK(is_head_parameter("head.cdp.weight"));
  CHECK_FALSE(is_head_parameter("pooler.weight"));
}

TEST_CASE("encoder task losses match finite differences") {
  const SuiteOptions opts;
  const auto entries = encoder_gradcheck_suite(opts);
  CHECK(entries.size() == 8);
  for (const auto& e : entries) {
    INFO(e.name << " worst " << e.worst_param << " rel " << e.max_rel_error);
    CHECK(entry_passes(e, opts));
    CHECK(e.elements_checked > 0);
  }
}
