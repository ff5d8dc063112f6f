#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "defemo/error.hpp"
#include "defemo/eval.hpp"

using namespace defemo;

namespace {

// Counts straight from set membership, one class at a time.
struct OracleClass {
  double p, r, f;
};

std::vector<OracleClass> oracle(const std::vector<LabelSet>& golds, const std::vector<LabelSet>& preds, int L) {
  std::vector<OracleClass> out;
  for (int c = 0; c < L; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
      const std::set<int> g(golds[i].begin(), golds[i].end());
      const std::set<int> p(preds[i].begin(), preds[i].end());
      const bool in_g = g.count(c) > 0;
      const bool in_p = p.count(c) > 0;
      if (in_g && in_p) tp += 1;
      if (!in_g && in_p) fp += 1;
      if (in_g && !in_p) fn += 1;
    }
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    out.push_back({prec, rec, f1});
  }
  return out;
}

LabelSet random_set(std::mt19937_64& rng, int L, int max_card) {
  std::set<int> s;
  const int card = std::min(L, static_cast<int>(rng() % static_cast<std::uint64_t>(max_card + 1)));
  while (static_cast<int>(s.size()) < card) s.insert(static_cast<int>(rng() % static_cast<std::uint64_t>(L)));
  return {s.begin(), s.end()};
}

}  // namespace

TEST_CASE("threshold inference") {
  const std::vector<double> p = {0.9, 0.2, 0.31};
  CHECK(predict_label_set(p, 0.3) == LabelSet{0, 2});
  const std::vector<double> exact = {0.3, 0.30000000000000004};
  CHECK(predict_label_set(exact, 0.3) == LabelSet{1});
  const std::vector<double> low = {0.1, 0.1, 0.1};
  CHECK(predict_label_set(low, 0.3).empty());
  CHECK(argmax_label(low) == 0);
  CHECK(argmax_label(p) == 0);

  const std::vector<std::vector<double>> rows = {{0.1, 0.2}, {0.5, 0.9}};
  CHECK(decide(rows, Decision::Threshold, 0.3) == std::vector<LabelSet>{{}, {0, 1}});
  CHECK(decide(rows, Decision::Argmax, 0.3) == std::vector<LabelSet>{{1}, {1}});
  CHECK(decide(rows, Decision::ThresholdOrArgmax, 0.3) == std::vector<LabelSet>{{1}, {0, 1}});
}

TEST_CASE("hand case") {
  const std::vector<LabelSet> gold = {{0}}, pred = {{0, 1}};
  const auto pc = per_class_prf(gold, pred, 2);
  CHECK(pc[0].f1 == 1.0);
  CHECK(pc[1].f1 == 0.0);
  CHECK(pc[1].false_positives == 1);
  const auto rep = make_report(pc, {"A", "B"}, "test");
  CHECK(rep.macro_f1 == 0.5);
  CHECK(rep.std_f1 == 0.5);
}

TEST_CASE("perfect predictions and absent classes") {
  const std::vector<LabelSet> gold = {{0}, {1, 2}, {0, 2}};
  const auto pc = per_class_prf(gold, gold, 4);
  CHECK(pc[0].f1 == 1.0);
  CHECK(pc[2].f1 == 1.0);
  CHECK(pc[3].f1 == 0.0);
  CHECK(pc[3].support == 0);
  CHECK(make_report(pc, {}, "x").macro_f1 == 0.75);
}

TEST_CASE("per-class metrics match the set-counting oracle") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const int L = 2 + static_cast<int>(rng() % 9);
    const std::size_t n = 1 + rng() % 30;
    std::vector<LabelSet> golds, preds;
    for (std::size_t i = 0; i < n; ++i) {
      golds.push_back(random_set(rng, L, 3));
      preds.push_back(random_set(rng, L, 4));
    }
    const auto pc = per_class_prf(golds, preds, static_cast<std::size_t>(L));
    const auto ref = oracle(golds, preds, L);
    double macro = 0;
    for (int c = 0; c < L; ++c) {
      CHECK(std::abs(pc[static_cast<std::size_t>(c)].precision - ref[static_cast<std::size_t>(c)].p) <= 1e-12);
      CHECK(std::abs(pc[static_cast<std::size_t>(c)].recall - ref[static_cast<std::size_t>(c)].r) <= 1e-12);
      CHECK(std::abs(pc[static_cast<std::size_t>(c)].f1 - ref[static_cast<std::size_t>(c)].f) <= 1e-12);
      macro += ref[static_cast<std::size_t>(c)].f;
    }
    const auto rep = make_report(pc, {}, "r");
    CHECK(std::abs(rep.macro_f1 - macro / L) <= 1e-12);
    CHECK(rep.macro_f1 >= 0.0);
    CHECK(rep.macro_f1 <= 1.0);

    auto perm_g = golds, perm_p = preds;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      perm_g[i] = golds[order[i]];
      perm_p[i] = preds[order[i]];
    }
    CHECK(make_report(per_class_prf(perm_g, perm_p, static_cast<std::size_t>(L)), {}, "r").macro_f1 == rep.macro_f1);
  }
}

TEST_CASE("single-label argmax agrees with exact-match accuracy") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t L = 5;
  std::vector<std::vector<double>> probs;
  std::vector<LabelSet> golds;
  std::size_t correct = 0;
  for (int i = 0; i < 300; ++i) {
    std::vector<double> row(L);
    for (auto& v : row) v = u(rng);
    const int gold = static_cast<int>(rng() % L);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    correct += best == gold;
    probs.push_back(row);
    golds.push_back({gold});
  }
  const auto preds = decide(probs, Decision::Argmax, 0.3);
  std::size_t exact = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) exact += preds[i] == golds[i];
  CHECK(exact == correct);
  std::size_t tp = 0;
  for (const auto& c : per_class_prf(golds, preds, L)) tp += c.true_positives;
  CHECK(tp == correct);
}

TEST_CASE("errors and report shapes") {
  const std::vector<LabelSet> gold = {{0}}, bad = {{5}};
  CHECK_THROWS(per_class_prf(gold, bad, 3));
  const std::vector<LabelSet> two = {{0}, {1}};
  CHECK_THROWS(per_class_prf(gold, two, 3));

  const auto rep = make_report(per_class_prf(two, two, 2), {"a", "b"}, "dev");
  const auto j = report_to_json(rep);
  CHECK(j["split"] == "dev");
  CHECK(j["macro"]["f1"] == 1.0);
  CHECK(j["per_class"].size() == 2);
  CHECK(j["per_class"][1]["name"] == "b");
  CHECK(j.contains("std_f1"));
  const auto csv = report_to_csv(rep);
  CHECK(csv.starts_with("label,name,precision,recall,f1,support\n"));
  CHECK(csv.find("macro") != std::string::npos);
}

TEST_CASE("evaluate is deterministic") {
  EncoderConfig c;
  c.num_layers = 1;
  c.num_heads = 2;
  c.hidden_dim = 8;
  c.ff_dim = 8;
  c.max_len = 16;
  c.vocab_size = 10;
  c.num_labels = 3;
  const Model<float> m(c);
  const auto v = Vocabulary::from_tokens({"a", "b", "c", "d", "e"});
  const std::vector<PrimaryExample> ex = {{"1", "a b", {0}}, {"2", "c d e", {1, 2}}, {"3", "", {2}}};
  const auto r1 = evaluate(m, v, ex, 0.3, Decision::Threshold, "test", {"x", "y", "z"}, 16);
  const auto r2 = evaluate(m, v, ex, 0.3, Decision::Threshold, "test", {"x", "y", "z"}, 16);
  CHECK(report_to_json(r1) == report_to_json(r2));
  const auto probs = predict_probabilities(m, v, std::vector<std::string>{"a b"}, 16);
  REQUIRE(probs.size() == 1);
  CHECK(probs[0].size() == 3);
  for (double p : probs[0]) CHECK((p > 0.0 && p < 1.0));
}
