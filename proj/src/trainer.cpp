#include "defemo/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "defemo/error.hpp"

namespace defemo {

std::string_view setup_name(Setup s) {
  switch (s) {
    case Setup::ClassificationOnly: return "classification_only";
    case Setup::Cdp: return "cdp";
    case Setup::Mlm: return "mlm";
    case Setup::CdpMlm: return "cdp_mlm";
  }
  return "unknown";
}

Setup parse_setup(std::string_view name) {
  for (auto s : {Setup::ClassificationOnly, Setup::Cdp, Setup::Mlm, Setup::CdpMlm}) {
    if (setup_name(s) == name) return s;
  }
  throw ConfigError("unknown setup '" + std::string(name) + "' (expected classification_only, cdp, mlm, cdp_mlm)");
}

std::string_view task_name(Task t) { return t == Task::Primary ? "primary" : "auxiliary"; }

void TrainConfig::validate() const {
  if (!(primary_prob >= 0.0 && primary_prob <= 1.0)) throw ConfigError("train: p must lie in [0, 1]");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("train: threshold must lie in (0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  if (max_len < 3) throw ConfigError("train: max_len must be >= 3");
  if (negatives_per_label < 1) throw ConfigError("train: negatives_per_label must be >= 1");
}

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x64656665u};
  return Rng(seq);
}

Task sample_task(Rng& rng, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sample_task: p must lie in [0, 1], got " + std::to_string(p));
  std::bernoulli_distribution primary(p);
  return primary(rng) ? Task::Primary : Task::Auxiliary;
}

// ---- BatchCycler ------------------------------------------------------------------

BatchCycler::BatchCycler(std::size_t n, Rng rng) : n_(n), rng_(std::move(rng)) {
  if (n_ == 0) throw DataError("BatchCycler: empty dataset");
  order_.resize(n_);
  reshuffle();
}

void BatchCycler::reshuffle() {
  for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
  std::shuffle(order_.begin(), order_.end(), rng_);
  pos_ = 0;
}

std::vector<std::size_t> BatchCycler::next(std::size_t batch_size) {
  std::vector<std::size_t> out;
  out.reserve(batch_size);
  while (out.size() < batch_size) {
    if (pos_ == n_) {
      ++passes_;
      reshuffle();
    }
    out.push_back(order_[pos_++]);
  }
  return out;
}

// ---- Trainer ------------------------------------------------------------------------

namespace {

enum Stream : std::uint64_t { kTaskStream = 1, kPrimaryStream, kAuxStream, kAuxBuildStream, kMaskStream, kDropoutStream };

std::size_t count_maskable(const TokenSequence& s) {
  return static_cast<std::size_t>(std::count_if(s.ids.begin(), s.ids.end(), [](TokenId t) { return !is_special(t); }));
}

}  // namespace

Trainer::Trainer(Model<float>& model, TrainConfig config, TrainInputs inputs)
    : model_(model),
      config_(std::move(config)),
      inputs_(std::move(inputs)),
      max_len_(std::min(config_.max_len, model.config().max_len)),
      task_rng_(make_stream(config_.seed, kTaskStream)),
      aux_build_rng_(make_stream(config_.seed, kAuxBuildStream)),
      mask_rng_(make_stream(config_.seed, kMaskStream)),
      dropout_rng_(make_stream(config_.seed, kDropoutStream)),
      aux_cycler_seed_(config_.seed),
      primary_cycler_(inputs_.primary.empty() ? throw DataError("train: empty primary dataset") : inputs_.primary.size(),
                      make_stream(config_.seed, kPrimaryStream)) {
  config_.validate();
  if (!inputs_.defs || !inputs_.vocab) throw ConfigError("train: definitions and vocabulary are required");
  if (inputs_.vocab->size() != model_.config().vocab_size) {
    throw ConfigError("train: vocabulary has " + std::to_string(inputs_.vocab->size()) + " tokens, model expects " +
                      std::to_string(model_.config().vocab_size));
  }
  if (inputs_.defs->size() != model_.config().num_labels) {
    throw ConfigError("train: " + std::to_string(inputs_.defs->size()) + " labels, model expects " +
                      std::to_string(model_.config().num_labels));
  }
  primary_seqs_.reserve(inputs_.primary.size());
  for (const auto& ex : inputs_.primary) {
    for (int l : ex.labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= model_.config().num_labels) {
        throw DataError("train: example '" + ex.id + "' has out-of-range label " + std::to_string(l));
      }
    }
    primary_seqs_.push_back(encode_single(ex.text, *inputs_.vocab, max_len_));
  }
  adam_.resize(model_.parameters().size());
  if (config_.setup != Setup::ClassificationOnly) build_aux_pool();
}

void Trainer::build_aux_pool() {
  std::vector<AuxExample> all;
  if (inputs_.aux && aux_pool_.empty()) {
    all = *inputs_.aux;
  } else {
    all = build_aux_dataset(inputs_.primary, *inputs_.defs, aux_build_rng_, {config_.negatives_per_label});
  }
  aux_pool_.clear();
  for (auto& a : all) {
    // The MLM setup trains on positive instances only.
    if (config_.setup == Setup::Mlm && a.relation != Relation::IsDefinition) continue;
    aux_pool_.push_back(std::move(a));
  }
  if (aux_pool_.empty()) throw DataError("train: auxiliary dataset is empty");
  aux_seqs_.clear();
  const PairOptions pair{config_.trailing_sep};
  for (const auto& a : aux_pool_) {
    aux_seqs_.push_back(encode_pair(a.text, inputs_.defs->definitions.at(static_cast<std::size_t>(a.def_label)),
                                    *inputs_.vocab, max_len_, pair));
  }
  aux_cycler_.emplace(aux_pool_.size(), make_stream(aux_cycler_seed_, kAuxStream));
  // A rebuilt pool gets a fresh but still seed-determined shuffle stream.
  aux_cycler_seed_ = aux_cycler_seed_ * 6364136223846793005ULL + 1442695040888963407ULL;
}

std::size_t Trainer::steps_per_epoch() const {
  return (inputs_.primary.size() + config_.batch_size - 1) / config_.batch_size;
}

void Trainer::end_epoch() {
  if (config_.resample_aux_per_epoch && config_.setup != Setup::ClassificationOnly) build_aux_pool();
}

StepRecord Trainer::step() {
  return train_step(sample_task(task_rng_, config_.effective_primary_prob()));
}

void Trainer::apply_update(const Gradients<float>& grads) {
  AdamHyper hyper;
  hyper.learning_rate = config_.learning_rate;
  auto& params = model_.parameters();
  for (const auto& e : grads.entries()) {
    const auto idx = static_cast<std::size_t>(e.param - params.data());
    adam_step(params[idx], e.grad, adam_[idx], hyper);
  }
}

StepRecord Trainer::train_step(Task task) {
  if (task == Task::Auxiliary && config_.setup == Setup::ClassificationOnly) {
    throw ConfigError("train_step: classification_only has no auxiliary task");
  }
  const std::size_t labels = model_.config().num_labels;
  const std::size_t vocab_size = model_.config().vocab_size;
  ForwardOptions train_mode{true, &dropout_rng_};

  std::vector<std::size_t> idx =
      task == Task::Primary ? primary_cycler_.next(config_.batch_size) : aux_cycler_->next(config_.batch_size);
  std::vector<const AuxExample*> aux_batch;
  if (task == Task::Auxiliary) {
    for (auto i : idx) aux_batch.push_back(&aux_pool_[i]);
  }
  if (observer_) observer_(task, idx, aux_batch);

  StepRecord rec;
  rec.step = step_;
  rec.task = task;
  try {
    Graph<float> g;
    Var<float> loss;
    if (task == Task::Primary) {
      std::vector<TokenSequence> seqs;
      Tensor<float> targets({idx.size(), labels});
      for (std::size_t r = 0; r < idx.size(); ++r) {
        seqs.push_back(primary_seqs_[idx[r]]);
        for (int l : inputs_.primary[idx[r]].labels) targets.data[r * labels + static_cast<std::size_t>(l)] = 1.0f;
      }
      auto hidden = model_.encode(g, pad_batch(seqs), train_mode);
      auto logits = model_.emotion_logits(g, model_.pool(g, hidden), train_mode);
      loss = emotion_loss(logits, targets);
    } else {
      const bool use_cdp = config_.setup == Setup::Cdp || config_.setup == Setup::CdpMlm;
      const bool use_mlm = config_.setup == Setup::Mlm || config_.setup == Setup::CdpMlm;
      std::vector<TokenSequence> seqs;
      std::vector<std::int64_t> cdp_targets;
      std::vector<std::pair<std::size_t, std::size_t>> masked_at;  // (row, position)
      std::vector<std::int64_t> mlm_targets;
      for (std::size_t r = 0; r < idx.size(); ++r) {
        TokenSequence seq = aux_seqs_[idx[r]];
        const auto& ex = aux_pool_[idx[r]];
        cdp_targets.push_back(ex.relation == Relation::IsDefinition ? 1 : 0);
        const bool mask_this = use_mlm && (config_.mlm_on_negatives || ex.relation == Relation::IsDefinition);
        if (mask_this && count_maskable(seq) > 0) {
          auto masked = apply_mlm_masking(seq, vocab_size, mask_rng_);
          seq.ids = std::move(masked.input_ids);
          for (std::size_t k = 0; k < masked.mask_positions.size(); ++k) {
            masked_at.emplace_back(r, masked.mask_positions[k]);
            mlm_targets.push_back(masked.target_ids[k]);
          }
        }
        seqs.push_back(std::move(seq));
      }
      const auto batch = pad_batch(seqs);
      auto hidden = model_.encode(g, batch, train_mode);
      std::optional<Var<float>> cdp, mlm;
      if (use_cdp) cdp = cdp_loss(model_.cdp_logits(g, model_.pool(g, hidden)), std::span<const std::int64_t>(cdp_targets));
      if (use_mlm && !masked_at.empty()) {
        std::vector<std::size_t> flat;
        for (auto [r, pos] : masked_at) flat.push_back(r * batch.seq_len + pos);
        mlm = mlm_loss(model_.mlm_logits(g, hidden, flat), std::span<const std::int64_t>(mlm_targets));
      }
      if (cdp && mlm) {
        loss = combined_loss(*cdp, *mlm, config_.cdp_weight, config_.mlm_weight);
      } else if (cdp) {
        loss = *cdp;
      } else if (mlm) {
        loss = *mlm;
      } else {
        throw DataError("train_step: auxiliary batch has no maskable tokens");
      }
    }
    rec.loss = loss.value().item();
    auto grads = g.backward(loss);
    rec.grad_norm = grads.global_norm();
    if (!std::isfinite(rec.grad_norm)) throw NumericError("non-finite gradient norm");
    apply_update(grads);
  } catch (const NumericError& e) {
    std::string ids;
    for (std::size_t i = 0; i < idx.size() && i < 32; ++i) ids += (i ? "," : "") + std::to_string(idx[i]);
    throw NumericError("step " + std::to_string(step_) + " (" + std::string(task_name(task)) + ", batch [" + ids +
                       "]): " + e.what());
  }
  ++step_;
  return rec;
}

// ---- logs and full runs ---------------------------------------------------------------

nlohmann::json step_to_json(const StepRecord& s) {
  return {{"step", s.step}, {"task", task_name(s.task)}, {"loss", s.loss}, {"grad_norm", s.grad_norm}};
}

nlohmann::json epoch_to_json(const EpochRecord& e) {
  nlohmann::json j = {{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"primary_steps", e.primary_steps}};
  if (e.dev) {
    j["dev_metrics"] = {{"macro_precision", e.dev->macro_precision},
                        {"macro_recall", e.dev->macro_recall},
                        {"macro_f1", e.dev->macro_f1}};
  } else {
    j["dev_metrics"] = nullptr;
  }
  return j;
}

TrainResult train_model(Model<float> model, const TrainConfig& config, const TrainInputs& inputs, const LogSink& log,
                        BatchObserver observer) {
  config.validate();
  if (inputs.primary.empty()) throw DataError("train: empty primary dataset");
  Trainer trainer(model, config, inputs);
  if (observer) trainer.set_observer(std::move(observer));

  TrainResult result{model, {}, {}, {}};
  const std::size_t per_epoch = trainer.steps_per_epoch();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord er;
    er.epoch = epoch;
    double total = 0.0;
    for (std::size_t s = 0; s < per_epoch; ++s) {
      auto rec = trainer.step();
      total += rec.loss;
      if (rec.task == Task::Primary) ++er.primary_steps;
      if (log) log(step_to_json(rec));
      result.steps.push_back(rec);
    }
    er.mean_loss = total / static_cast<double>(per_epoch);
    if (!inputs.dev.empty()) {
      er.dev = evaluate(model, *inputs.vocab, inputs.dev, config.threshold, Decision::Threshold, "dev",
                        inputs.defs->names, config.max_len);
    }
    if (log) log(epoch_to_json(er));
    result.epochs.push_back(std::move(er));
    trainer.end_epoch();
  }
  result.checkpoint = make_checkpoint(model, config, inputs.defs->names, inputs.vocab->fingerprint());
  result.model = std::move(model);
  return result;
}

TrainResult train(const EncoderConfig& encoder, const TrainConfig& config, const TrainInputs& inputs,
                  const LogSink& log, BatchObserver observer) {
  if (!inputs.defs || !inputs.vocab) throw ConfigError("train: definitions and vocabulary are required");
  EncoderConfig enc = encoder;
  if (enc.vocab_size == 0) enc.vocab_size = inputs.vocab->size();
  if (enc.vocab_size != inputs.vocab->size()) {
    throw ConfigError("train: encoder vocab_size " + std::to_string(enc.vocab_size) + " != vocabulary size " +
                      std::to_string(inputs.vocab->size()));
  }
  if (enc.num_labels != inputs.defs->size()) {
    throw ConfigError("train: encoder num_labels " + std::to_string(enc.num_labels) + " != " +
                      std::to_string(inputs.defs->size()) + " definitions");
  }
  return train_model(Model<float>(enc), config, inputs, log, std::move(observer));
}

}  // namespace defemo
