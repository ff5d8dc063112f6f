#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "defemo/data.hpp"
#include "defemo/eval.hpp"
#include "defemo/model.hpp"
#include "defemo/tokenizer.hpp"
#include "defemo/train_config.hpp"

namespace defemo {

// An absolute train size ("500") or a fraction of the dataset ("80%").
struct TrainSize {
  bool percent = false;
  double value = 0.0;

  static TrainSize parse(std::string_view text);
  std::string label() const;
  // Throws ConfigError unless 1 <= size < n.
  std::size_t resolve(std::size_t n) const;

  friend bool operator==(const TrainSize&, const TrainSize&) = default;
};

struct TransferPlan {
  std::vector<TrainSize> sizes = {{false, 100}, {false, 200}, {false, 500}, {false, 1000}, {true, 80}};
  std::size_t n_splits = 10;
  std::uint64_t seed = 0;
};

struct TransferSplit {
  std::string size_label;
  std::size_t size = 0;
  std::size_t split_index = 0;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> test_ids;
};

// Seeded sample without replacement per (size, split); the complement is the
// test set. Independent of any initializer.
std::vector<TransferSplit> make_transfer_splits(std::size_t dataset_size, const TransferPlan& plan);

// Copies every parameter except the emotion head, which gets a fresh
// init for `new_labels` classes.
Model<float> reinit_classifier_head(const Model<float>& source, std::size_t new_labels, std::uint64_t seed);

struct Initializer {
  std::string name;
  // Absent: fresh init ("vanilla") from `fresh_encoder`.
  std::optional<Model<float>> source;
};

struct TransferOptions {
  TrainConfig finetune;
  EncoderConfig fresh_encoder;
  Decision decision = Decision::Argmax;
  std::size_t threads = 1;
};

struct TransferRun {
  std::string initializer;
  std::string size_label;
  std::size_t size = 0;
  std::size_t split_index = 0;
  std::uint64_t train_ids_hash = 0;
  double macro_f1 = 0.0;
};

struct TransferCell {
  std::string initializer;
  std::string size_label;
  std::size_t size = 0;
  double mean_macro_f1 = 0.0;
  // Sample standard deviation across splits.
  double std_macro_f1 = 0.0;
  std::size_t n_runs = 0;
};

struct TransferReport {
  std::string dataset;
  std::vector<TransferCell> cells;
  std::vector<TransferRun> runs;
};

std::uint64_t hash_ids(const std::vector<std::size_t>& ids);

// Fine-tunes every initializer on every split as classification_only.
TransferReport run_transfer_sweep(const std::string& dataset_name, const TargetDataset& dataset,
                                  const std::vector<Initializer>& initializers, const Vocabulary& vocab,
                                  const TransferPlan& plan, const TransferOptions& options);

nlohmann::json transfer_to_json(const TransferReport& report);
// dataset,initializer,size,mean_macro_f1,std_macro_f1,n_runs
std::string transfer_to_csv(const TransferReport& report);
std::string transfer_runs_to_csv(const TransferReport& report);

}  // namespace defemo
