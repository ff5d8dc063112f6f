#include <doctest.h>

#include <algorithm>
#include <set>

#include "defemo/error.hpp"
#include "defemo/synthetic.hpp"
#include "defemo/transfer.hpp"

using namespace defemo;

namespace {

EncoderConfig small_encoder(std::size_t vocab, std::size_t labels) {
  EncoderConfig c;
  c.num_layers = 1;
  c.num_heads = 2;
  c.hidden_dim = 8;
  c.ff_dim = 16;
  c.max_len = 24;
  c.vocab_size = vocab;
  c.num_labels = labels;
  c.seed = 4;
  return c;
}

}  // namespace

TEST_CASE("train size parsing") {
  CHECK(TrainSize::parse("500") == TrainSize{false, 500});
  CHECK(TrainSize::parse("80%") == TrainSize{true, 80});
  CHECK(TrainSize::parse("80%").resolve(1000) == 800);
  CHECK(TrainSize::parse("80%").label() == "80%");
  CHECK(TrainSize::parse("100").resolve(1000) == 100);
  CHECK_THROWS_AS(TrainSize::parse("1000").resolve(1000), ConfigError);
  CHECK_THROWS_AS(TrainSize::parse("abc"), ConfigError);
  CHECK_THROWS_AS(TrainSize::parse("100%"), ConfigError);
}

TEST_CASE("splits are disjoint, sized and seeded") {
  TransferPlan plan;
  plan.seed = 3;
  const auto splits = make_transfer_splits(1200, plan);
  CHECK(splits.size() == 5 * 10);
  for (const auto& s : splits) {
    CHECK(s.train_ids.size() == s.size);
    CHECK(s.train_ids.size() + s.test_ids.size() == 1200);
    std::vector<std::size_t> both;
    std::set_intersection(s.train_ids.begin(), s.train_ids.end(), s.test_ids.begin(), s.test_ids.end(),
                          std::back_inserter(both));
    CHECK(both.empty());
  }
  CHECK(splits.back().size == 960);
  CHECK(splits.back().test_ids.size() == 240);
  CHECK(splits.front().test_ids.size() == 1100);

  const auto again = make_transfer_splits(1200, plan);
  for (std::size_t i = 0; i < splits.size(); ++i) CHECK(splits[i].train_ids == again[i].train_ids);
  CHECK(splits[0].train_ids != splits[1].train_ids);

  plan.seed = 4;
  CHECK(make_transfer_splits(1200, plan)[0].train_ids != splits[0].train_ids);
  CHECK_THROWS_AS(make_transfer_splits(500, TransferPlan{}), ConfigError);
}

TEST_CASE("head reinitialization preserves the backbone") {
  const Model<float> src(small_encoder(20, 5));
  const auto same = reinit_classifier_head(src, 5, 9);
  const auto other = reinit_classifier_head(src, 3, 9);
  const auto again = reinit_classifier_head(src, 3, 9);
  for (std::size_t i = 0; i < src.parameters().size(); ++i) {
    const auto& name = src.parameters()[i].name;
    if (name.starts_with("head.emotion")) continue;
    CHECK(other.parameters()[i].value == src.parameters()[i].value);
    CHECK(same.parameters()[i].value == src.parameters()[i].value);
  }
  CHECK(other.parameter("head.emotion.weight").value.shape == Shape{8, 3});
  CHECK(other.config().num_labels == 3);
  CHECK(other.parameter("head.emotion.weight").value == again.parameter("head.emotion.weight").value);
  CHECK(same.parameter("head.emotion.weight").value != src.parameter("head.emotion.weight").value);
  CHECK_THROWS_AS(reinit_classifier_head(src, 1, 9), ConfigError);
}

TEST_CASE("sweep report shape and determinism") {
  const auto ds = make_synthetic_target(120, 2);
  std::vector<std::string> corpus;
  for (const auto& ex : ds.examples) corpus.push_back(ex.text);
  const auto vocab = Vocabulary::build(corpus, 1, 1000);
  const auto enc = small_encoder(vocab.size(), 3);

  TransferPlan plan;
  plan.sizes = {{false, 20}, {false, 40}};
  plan.n_splits = 3;
  plan.seed = 1;
  TransferOptions opts;
  opts.finetune.epochs = 2;
  opts.finetune.batch_size = 8;
  opts.finetune.max_len = 24;
  opts.fresh_encoder = enc;

  std::vector<Initializer> inits = {{"fresh", std::nullopt}, {"ckpt", Model<float>(enc)}};
  const auto r1 = run_transfer_sweep("t", ds, inits, vocab, plan, opts);
  CHECK(r1.cells.size() == 4);
  CHECK(r1.runs.size() == 12);
  for (const auto& c : r1.cells) CHECK(c.n_runs == 3);
  for (std::size_t k = 0; k < 6; ++k) CHECK(r1.runs[k].train_ids_hash == r1.runs[k + 6].train_ids_hash);

  opts.threads = 3;
  const auto r2 = run_transfer_sweep("t", ds, inits, vocab, plan, opts);
  CHECK(transfer_to_json(r1) == transfer_to_json(r2));

  const auto csv = transfer_to_csv(r1);
  CHECK(csv.starts_with("dataset,initializer,size,mean_macro_f1,std_macro_f1,n_runs\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  const auto runs_csv = transfer_runs_to_csv(r1);
  CHECK(std::count(runs_csv.begin(), runs_csv.end(), '\n') == 13);
}
