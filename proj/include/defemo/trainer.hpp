#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "defemo/adam.hpp"
#include "defemo/checkpoint.hpp"
#include "defemo/data.hpp"
#include "defemo/eval.hpp"
#include "defemo/model.hpp"
#include "defemo/train_config.hpp"

namespace defemo {

// Independent seeded stream `stream` derived from a run seed.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

// Bernoulli(p) draw: Primary with probability p.
Task sample_task(Rng& rng, double p);

// Endless stream of indices over [0, n); each pass is a fresh shuffle.
class BatchCycler {
 public:
  BatchCycler(std::size_t n, Rng rng);

  std::vector<std::size_t> next(std::size_t batch_size);
  std::size_t passes() const { return passes_; }

 private:
  void reshuffle();

  std::size_t n_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::size_t passes_ = 0;
};

struct StepRecord {
  std::size_t step = 0;
  Task task = Task::Primary;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::size_t primary_steps = 0;
  std::optional<MetricsReport> dev;
};

struct TrainInputs {
  std::span<const PrimaryExample> primary;
  const DefinitionTable* defs = nullptr;
  const Vocabulary* vocab = nullptr;
  std::span<const PrimaryExample> dev = {};
  // Prebuilt auxiliary instances; built from `primary` when absent.
  std::optional<std::vector<AuxExample>> aux;
};

// Test hook: sees every batch before its forward pass. For auxiliary steps
// `aux_batch` holds the instances; for primary steps it is empty.
using BatchObserver =
    std::function<void(Task task, std::span<const std::size_t> indices, std::span<const AuxExample* const> aux_batch)>;

class Trainer {
 public:
  Trainer(Model<float>& model, TrainConfig config, TrainInputs inputs);

  // Samples the task, then runs one optimizer step on it.
  StepRecord step();
  StepRecord train_step(Task task);

  // Epoch bookkeeping; rebuilds the auxiliary pool when configured to.
  void end_epoch();

  std::size_t steps_per_epoch() const;
  std::size_t steps_taken() const { return step_; }
  const std::vector<AuxExample>& aux_pool() const { return aux_pool_; }
  const TrainConfig& config() const { return config_; }

  void set_observer(BatchObserver observer) { observer_ = std::move(observer); }

 private:
  void build_aux_pool();
  void apply_update(const Gradients<float>& grads);

  Model<float>& model_;
  TrainConfig config_;
  TrainInputs inputs_;
  std::size_t max_len_;

  Rng task_rng_;
  Rng aux_build_rng_;
  Rng mask_rng_;
  Rng dropout_rng_;
  std::uint64_t aux_cycler_seed_;
  BatchCycler primary_cycler_;
  std::optional<BatchCycler> aux_cycler_;

  std::vector<TokenSequence> primary_seqs_;
  std::vector<AuxExample> aux_pool_;
  std::vector<TokenSequence> aux_seqs_;

  std::vector<AdamState<float>> adam_;
  std::size_t step_ = 0;
  BatchObserver observer_;
};

struct TrainResult {
  Model<float> model;
  Checkpoint checkpoint;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
};

using LogSink = std::function<void(const nlohmann::json&)>;

nlohmann::json step_to_json(const StepRecord& s);
nlohmann::json epoch_to_json(const EpochRecord& e);

// Full run: epochs x steps_per_epoch iterations with per-epoch dev metrics.
// The model is initialized from `encoder`, whose vocab_size and num_labels
// must agree with the inputs.
TrainResult train(const EncoderConfig& encoder, const TrainConfig& config, const TrainInputs& inputs,
                  const LogSink& log = {}, BatchObserver observer = {});

// Continues training an existing model (used for transfer fine-tuning).
TrainResult train_model(Model<float> model, const TrainConfig& config, const TrainInputs& inputs,
                        const LogSink& log = {}, BatchObserver observer = {});

}  // namespace defemo
