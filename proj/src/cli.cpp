#include "defemo/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "defemo/checkpoint.hpp"
#include "defemo/data.hpp"
#include "defemo/error.hpp"
#include "defemo/eval.hpp"
#include "defemo/gradsuite.hpp"
#include "defemo/trainer.hpp"
#include "defemo/transfer.hpp"

namespace defemo {

namespace fs = std::filesystem;

namespace {

// Output paths must sit in an existing directory.
const CLI::Validator kWritablePath(
    [](std::string& path) -> std::string {
      const auto parent = fs::path(path).parent_path();
      if (!parent.empty() && !fs::is_directory(parent)) return "directory does not exist: " + parent.string();
      return {};
    },
    "WRITABLE");

struct Common {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sub->add_option("--threads", c.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

struct EncoderFlags {
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t hidden = 64;
  std::size_t ff = 128;
  std::size_t max_len = 64;
  double dropout = 0.1;

  EncoderConfig to_config() const {
    EncoderConfig c;
    c.num_layers = layers;
    c.num_heads = heads;
    c.hidden_dim = hidden;
    c.ff_dim = ff;
    c.max_len = max_len;
    c.dropout_rate = dropout;
    return c;
  }
};

void add_encoder_flags(CLI::App* sub, EncoderFlags& e) {
  sub->add_option("--layers", e.layers, "Encoder layers")->capture_default_str();
  sub->add_option("--heads", e.heads, "Attention heads")->capture_default_str();
  sub->add_option("--hidden", e.hidden, "Hidden size")->capture_default_str();
  sub->add_option("--ff", e.ff, "Feed-forward size")->capture_default_str();
  sub->add_option("--max-len", e.max_len, "Maximum sequence length")->capture_default_str();
  sub->add_option("--dropout", e.dropout, "Dropout rate")->capture_default_str();
}

struct TrainFlags {
  std::string setup = "cdp";
  double p = 0.5;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double threshold = 0.3;
  bool resample_aux = false;
  bool mlm_positives_only = false;
  bool trailing_sep = false;
  std::size_t negatives = 1;
  double cdp_weight = 1.0;
  double mlm_weight = 1.0;
};

void add_train_flags(CLI::App* sub, TrainFlags& t) {
  sub->add_option("--setup", t.setup, "classification_only, cdp, mlm or cdp_mlm")->capture_default_str();
  sub->add_option("--p", t.p, "Probability of a primary-task step")->capture_default_str();
  sub->add_option("--epochs", t.epochs, "Epochs")->capture_default_str();
  sub->add_option("--batch-size", t.batch_size, "Batch size")->capture_default_str();
  sub->add_option("--lr", t.lr, "Adam learning rate")->capture_default_str();
  sub->add_option("--threshold", t.threshold, "Decision threshold")->capture_default_str();
  sub->add_flag("--resample-aux-per-epoch", t.resample_aux, "Rebuild auxiliary negatives every epoch");
  sub->add_flag("--mlm-positives-only", t.mlm_positives_only, "cdp_mlm: mask IsDefinition instances only");
  sub->add_flag("--trailing-sep", t.trailing_sep, "Append [SEP] after the definition");
  sub->add_option("--negatives", t.negatives, "Negatives per gold label")->capture_default_str();
  sub->add_option("--cdp-weight", t.cdp_weight, "CDP weight in the combined loss")->capture_default_str();
  sub->add_option("--mlm-weight", t.mlm_weight, "MLM weight in the combined loss")->capture_default_str();
}

TrainConfig to_train_config(const TrainFlags& t, std::size_t max_len, std::uint64_t seed) {
  TrainConfig c;
  c.setup = parse_setup(t.setup);
  c.primary_prob = t.p;
  c.epochs = t.epochs;
  c.batch_size = t.batch_size;
  c.learning_rate = t.lr;
  c.max_len = max_len;
  c.threshold = t.threshold;
  c.seed = seed;
  c.resample_aux_per_epoch = t.resample_aux;
  c.mlm_on_negatives = !t.mlm_positives_only;
  c.trailing_sep = t.trailing_sep;
  c.negatives_per_label = t.negatives;
  c.cdp_weight = t.cdp_weight;
  c.mlm_weight = t.mlm_weight;
  c.validate();
  return c;
}

DefinitionTable load_defs_or_builtin(const std::string& path) {
  return path.empty() ? goemotions_definitions() : load_definitions(path);
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write file", path);
  f << text;
}

Decision parse_decision(const std::string& name, bool fallback) {
  if (name == "argmax") return Decision::Argmax;
  if (name != "threshold") throw ConfigError("unknown decision '" + name + "' (expected threshold or argmax)");
  return fallback ? Decision::ThresholdOrArgmax : Decision::Threshold;
}

std::string format_prob(double p) {
  std::ostringstream s;
  s.precision(4);
  s << std::fixed << p;
  return s.str();
}

// ---- subcommands ------------------------------------------------------------------------

struct BuildAuxArgs {
  Common common;
  std::string data, defs, out;
  std::size_t negatives = 1;
};

int cmd_build_aux(const BuildAuxArgs& a, std::ostream& out, std::ostream& err) {
  const auto defs = load_defs_or_builtin(a.defs);
  const auto examples = load_primary_tsv(a.data, defs.size());
  Rng rng = make_stream(a.common.seed, 4);
  const auto aux = build_aux_dataset(examples, defs, rng, {a.negatives});
  write_aux_tsv(a.out, aux, defs);
  err << "wrote " << aux.size() << " auxiliary instances from " << examples.size() << " examples\n";
  out << nlohmann::json{{"examples", examples.size()}, {"aux_instances", aux.size()}, {"out", a.out}}.dump() << '\n';
  return kExitOk;
}

struct TrainArgs {
  Common common;
  EncoderFlags encoder;
  TrainFlags train;
  std::string train_path, dev_path, defs, vocab, out, vocab_out, log;
  std::size_t min_freq = 1;
  std::size_t max_vocab = 30000;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto defs = load_defs_or_builtin(a.defs);
  const auto train_set = load_primary_tsv(a.train_path, defs.size());
  std::vector<PrimaryExample> dev_set;
  if (!a.dev_path.empty()) dev_set = load_primary_tsv(a.dev_path, defs.size());
  const TrainConfig config = to_train_config(a.train, a.encoder.max_len, a.common.seed);

  Vocabulary vocab = [&] {
    if (!a.vocab.empty()) return Vocabulary::load(a.vocab);
    std::vector<std::string> corpus;
    for (const auto& ex : train_set) corpus.push_back(ex.text);
    for (const auto& d : defs.definitions) corpus.push_back(d);
    return Vocabulary::build(corpus, a.min_freq, a.max_vocab);
  }();
  const std::string vocab_out = a.vocab_out.empty() ? a.out + ".vocab" : a.vocab_out;
  const std::string log_path = a.log.empty() ? a.out + ".log.jsonl" : a.log;

  EncoderConfig enc = a.encoder.to_config();
  enc.vocab_size = vocab.size();
  enc.num_labels = defs.size();
  enc.seed = a.common.seed;

  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw DataError("cannot write file", log_path);
  TrainInputs inputs;
  inputs.primary = train_set;
  inputs.defs = &defs;
  inputs.vocab = &vocab;
  inputs.dev = dev_set;
  err << "training " << setup_name(config.setup) << " p=" << config.effective_primary_prob() << " on "
      << train_set.size() << " examples, vocab " << vocab.size() << '\n';
  auto result = train(enc, config, inputs, [&](const nlohmann::json& j) {
    log << j.dump() << '\n';
    if (j.contains("epoch")) err << j.dump() << '\n';
  });
  save_checkpoint(a.out, result.checkpoint);
  vocab.save(vocab_out);

  std::size_t primary_steps = 0;
  for (const auto& s : result.steps) primary_steps += s.task == Task::Primary;
  char checksum[17];
  std::snprintf(checksum, sizeof checksum, "%016llx", static_cast<unsigned long long>(result.checkpoint.checksum));
  nlohmann::json summary = {{"checkpoint", a.out},       {"vocab", vocab_out},
                            {"log", log_path},           {"checksum", checksum},
                            {"steps", result.steps.size()}, {"primary_steps", primary_steps}};
  if (!result.epochs.empty() && result.epochs.back().dev) {
    summary["dev_macro_f1"] = result.epochs.back().dev->macro_f1;
  }
  out << summary.dump() << '\n';
  return kExitOk;
}

struct LoadedModel {
  Checkpoint ckpt;
  Vocabulary vocab;
  Model<float> model;
};

LoadedModel load_model(const std::string& ckpt_path, const std::string& vocab_path) {
  auto ckpt = load_checkpoint(ckpt_path);
  auto vocab = Vocabulary::load(vocab_path.empty() ? ckpt_path + ".vocab" : vocab_path);
  check_compatible(ckpt, ckpt.encoder.num_labels, vocab);
  auto model = model_from_checkpoint(ckpt);
  return {std::move(ckpt), std::move(vocab), std::move(model)};
}

struct EvaluateArgs {
  Common common;
  std::string checkpoint, vocab, data, defs, split = "test", decision = "threshold", json, csv;
  std::optional<double> threshold;
  bool fallback_argmax = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream&) {
  auto loaded = load_model(a.checkpoint, a.vocab);
  std::vector<std::string> names = loaded.ckpt.label_names;
  if (!a.defs.empty()) {
    const auto defs = load_definitions(a.defs);
    check_compatible(loaded.ckpt, defs.size(), loaded.vocab);
    names = defs.names;
  }
  const auto examples = load_primary_tsv(a.data, names.size());
  const double threshold = a.threshold.value_or(loaded.ckpt.train.threshold);
  auto report = evaluate(loaded.model, loaded.vocab, examples, threshold, parse_decision(a.decision, a.fallback_argmax),
                         a.split, names, loaded.ckpt.train.max_len);
  report.config["checkpoint"] = a.checkpoint;
  report.config["setup"] = setup_name(loaded.ckpt.train.setup);
  report.config["p"] = loaded.ckpt.train.primary_prob;
  write_text(a.json, report_to_json(report).dump(2) + "\n", out);
  if (!a.csv.empty()) write_text(a.csv, report_to_csv(report), out);
  return kExitOk;
}

struct PredictArgs {
  Common common;
  std::string checkpoint, vocab, input = "-", out;
  std::optional<double> threshold;
  bool fallback_argmax = false;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream&) {
  auto loaded = load_model(a.checkpoint, a.vocab);
  std::vector<std::string> texts;
  {
    std::ifstream file;
    std::istream* in = &std::cin;
    if (a.input != "-") {
      file.open(a.input);
      if (!file) throw DataError("cannot open file", a.input);
      in = &file;
    }
    std::string line;
    while (std::getline(*in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      texts.push_back(line);
    }
  }
  const double threshold = a.threshold.value_or(loaded.ckpt.train.threshold);
  const auto probs = predict_probabilities(loaded.model, loaded.vocab, texts, loaded.ckpt.train.max_len);
  const auto sets = decide(probs, a.fallback_argmax ? Decision::ThresholdOrArgmax : Decision::Threshold, threshold);
  std::ostringstream result;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto labels = sets[i];
    std::sort(labels.begin(), labels.end(), [&](int x, int y) {
      return probs[i][static_cast<std::size_t>(x)] > probs[i][static_cast<std::size_t>(y)];
    });
    result << texts[i] << '\t';
    for (std::size_t k = 0; k < labels.size(); ++k) {
      const auto l = static_cast<std::size_t>(labels[k]);
      result << (k ? " " : "") << loaded.ckpt.label_names[l] << ':' << format_prob(probs[i][l]);
    }
    result << '\n';
  }
  write_text(a.out, result.str(), out);
  return kExitOk;
}

struct TransferArgs {
  Common common;
  EncoderFlags encoder;
  std::string target, vocab, labels, dataset_name, json, csv, runs_csv;
  std::vector<std::string> inits;
  bool no_fresh = false;
  std::string sizes = "100,200,500,1000,80%";
  std::size_t splits = 10;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double threshold = 0.3;
  std::string decision = "argmax";
};

int cmd_transfer(const TransferArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<std::string> label_names;
  if (!a.labels.empty()) {
    std::ifstream f(a.labels);
    if (!f) throw DataError("cannot open file", a.labels);
    std::string line;
    while (std::getline(f, line)) {
      if (!line.empty()) label_names.push_back(line);
    }
  }
  const auto dataset = load_target_tsv(a.target, label_names);

  TransferPlan plan;
  plan.seed = a.common.seed;
  plan.n_splits = a.splits;
  plan.sizes.clear();
  std::stringstream ss(a.sizes);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) plan.sizes.push_back(TrainSize::parse(item));
  }
  // Resolve every size before any training starts.
  for (const auto& s : plan.sizes) s.resolve(dataset.examples.size());

  std::vector<std::pair<std::string, std::string>> init_paths;
  for (const auto& spec : a.inits) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw ConfigError("--init expects name=checkpoint, got '" + spec + "'");
    }
    const auto path = spec.substr(eq + 1);
    if (!fs::is_regular_file(path)) throw DataError("checkpoint not found", path);
    init_paths.emplace_back(spec.substr(0, eq), path);
  }
  if (a.no_fresh && init_paths.empty()) throw ConfigError("transfer: no initializers (use --init or drop --no-fresh)");

  std::optional<Vocabulary> vocab;
  if (!a.vocab.empty()) {
    vocab = Vocabulary::load(a.vocab);
  } else if (!init_paths.empty()) {
    vocab = Vocabulary::load(init_paths.front().second + ".vocab");
  } else {
    std::vector<std::string> corpus;
    for (const auto& ex : dataset.examples) corpus.push_back(ex.text);
    vocab = Vocabulary::build(corpus, 1, 30000);
  }

  std::vector<Initializer> inits;
  if (!a.no_fresh) inits.push_back({"fresh", std::nullopt});
  for (const auto& [name, path] : init_paths) {
    auto ckpt = load_checkpoint(path);
    check_compatible(ckpt, ckpt.encoder.num_labels, *vocab);
    inits.push_back({name, model_from_checkpoint(ckpt)});
  }

  TransferOptions opts;
  opts.finetune.setup = Setup::ClassificationOnly;
  opts.finetune.primary_prob = 1.0;
  opts.finetune.epochs = a.epochs;
  opts.finetune.batch_size = a.batch_size;
  opts.finetune.learning_rate = a.lr;
  opts.finetune.max_len = a.encoder.max_len;
  opts.finetune.threshold = a.threshold;
  opts.finetune.validate();
  opts.fresh_encoder = a.encoder.to_config();
  opts.decision = parse_decision(a.decision, false);
  opts.threads = a.common.threads;

  const std::string name = a.dataset_name.empty() ? fs::path(a.target).stem().string() : a.dataset_name;
  err << "transfer: " << inits.size() << " initializers x " << plan.sizes.size() << " sizes x " << plan.n_splits
      << " splits on " << dataset.examples.size() << " examples\n";
  const auto report = run_transfer_sweep(name, dataset, inits, *vocab, plan, opts);
  write_text(a.json, transfer_to_json(report).dump(2) + "\n", out);
  if (!a.csv.empty()) write_text(a.csv, transfer_to_csv(report), out);
  if (!a.runs_csv.empty()) write_text(a.runs_csv, transfer_runs_to_csv(report), out);
  return kExitOk;
}

struct GradcheckArgs {
  Common common;
  double eps = 1e-4;
  std::size_t trials = 12;
  std::string json;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  SuiteOptions opts;
  opts.seed = a.common.seed == 0 ? opts.seed : a.common.seed;
  opts.eps = a.eps;
  opts.primitive_trials = a.trials;
  auto entries = primitive_gradcheck_suite(opts);
  const auto enc = encoder_gradcheck_suite(opts);
  entries.insert(entries.end(), enc.begin(), enc.end());
  const auto j = suite_to_json(entries, opts);
  for (const auto& e : entries) {
    err << (entry_passes(e, opts) ? "ok   " : "FAIL ") << e.name << ' ';
    if (e.structural_zero) {
      err << "|analytic|<=" << e.max_abs_analytic << " |numeric|<=" << e.max_abs_numeric << '\n';
    } else {
      err << "max rel error " << e.max_rel_error << '\n';
    }
  }
  err << "max rel error " << j["max_rel_error"].get<double>() << '\n';
  write_text(a.json, j.dump(2) + "\n", out);
  return j["passed"].get<bool>() ? kExitOk : kExitNumeric;
}

struct StatsArgs {
  Common common;
  std::string data, defs, split = "train", json;
};

int cmd_stats(const StatsArgs& a, std::ostream& out, std::ostream&) {
  const auto defs = load_defs_or_builtin(a.defs);
  const auto examples = load_primary_tsv(a.data, defs.size());
  const auto stats = dataset_stats(examples, defs.size(), a.split);
  write_text(a.json, stats_to_json(stats, &defs).dump(2) + "\n", out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-task emotion classification with emotion-definition modeling", "defemo"};
  app.set_config("--config", "", "INI/TOML file; sections are subcommand names, flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  BuildAuxArgs aux;
  auto* aux_cmd = app.add_subcommand("build-aux", "Write the auxiliary (text, definition, relation) dataset");
  aux_cmd->add_option("--data", aux.data, "Primary TSV")->required()->check(CLI::ExistingFile);
  aux_cmd->add_option("--defs", aux.defs, "Definitions TSV (default: built-in 28 labels)")->check(CLI::ExistingFile);
  aux_cmd->add_option("--out", aux.out, "Output TSV")->required()->check(kWritablePath);
  aux_cmd->add_option("--negatives", aux.negatives, "Negatives per gold label")->capture_default_str();
  add_common(aux_cmd, aux.common);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--train", tr.train_path, "Primary training TSV")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--dev", tr.dev_path, "Dev TSV for per-epoch metrics")->check(CLI::ExistingFile);
  train_cmd->add_option("--defs", tr.defs, "Definitions TSV (default: built-in 28 labels)")->check(CLI::ExistingFile);
  train_cmd->add_option("--vocab", tr.vocab, "Vocabulary file (default: built from the training data)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required()->check(kWritablePath);
  train_cmd->add_option("--vocab-out", tr.vocab_out, "Vocabulary output (default: <out>.vocab)")->check(kWritablePath);
  train_cmd->add_option("--log", tr.log, "JSONL training log (default: <out>.log.jsonl)")->check(kWritablePath);
  train_cmd->add_option("--min-freq", tr.min_freq, "Minimum token frequency for a built vocabulary")
      ->capture_default_str();
  train_cmd->add_option("--max-vocab", tr.max_vocab, "Maximum built vocabulary size")->capture_default_str();
  add_encoder_flags(train_cmd, tr.encoder);
  add_train_flags(train_cmd, tr.train);
  add_common(train_cmd, tr.common);

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Per-class and macro precision/recall/F1 on a split");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--vocab", ev.vocab, "Vocabulary (default: <checkpoint>.vocab)")->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev.data, "Primary TSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--defs", ev.defs, "Definitions TSV; must match the checkpoint labels")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", ev.split, "Split name for the report")->capture_default_str();
  eval_cmd->add_option("--threshold", ev.threshold, "Decision threshold (default: from the checkpoint)");
  eval_cmd->add_option("--decision", ev.decision, "threshold or argmax")->capture_default_str();
  eval_cmd->add_flag("--fallback-argmax", ev.fallback_argmax, "Use the argmax label when no label crosses");
  eval_cmd->add_option("--json", ev.json, "Report JSON path (default: stdout)")->check(kWritablePath);
  eval_cmd->add_option("--csv", ev.csv, "Per-class CSV path")->check(kWritablePath);
  add_common(eval_cmd, ev.common);

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Predict label sets for texts, one per line");
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--vocab", pr.vocab, "Vocabulary (default: <checkpoint>.vocab)")->check(CLI::ExistingFile);
  predict_cmd->add_option("--input", pr.input, "Text file, or - for stdin")->capture_default_str();
  predict_cmd->add_option("--out", pr.out, "Output path (default: stdout)")->check(kWritablePath);
  predict_cmd->add_option("--threshold", pr.threshold, "Decision threshold (default: from the checkpoint)");
  predict_cmd->add_flag("--fallback-argmax", pr.fallback_argmax, "Use the argmax label when no label crosses");
  add_common(predict_cmd, pr.common);

  TransferArgs tf;
  auto* transfer_cmd = app.add_subcommand("transfer", "Fine-tune initializers over train sizes and random splits");
  transfer_cmd->add_option("--target", tf.target, "Target TSV (text, label name)")->required()->check(CLI::ExistingFile);
  transfer_cmd->add_option("--labels", tf.labels, "Label names, one per line (default: sorted names in the data)")
      ->check(CLI::ExistingFile);
  transfer_cmd->add_option("--init", tf.inits, "name=checkpoint; repeatable");
  transfer_cmd->add_flag("--no-fresh", tf.no_fresh, "Skip the freshly initialized baseline");
  transfer_cmd->add_option("--vocab", tf.vocab, "Vocabulary (default: that of the first --init checkpoint)")
      ->check(CLI::ExistingFile);
  transfer_cmd->add_option("--sizes", tf.sizes, "Comma-separated train sizes; N or P%")->capture_default_str();
  transfer_cmd->add_option("--splits", tf.splits, "Random splits per size")->capture_default_str();
  transfer_cmd->add_option("--epochs", tf.epochs, "Fine-tuning epochs")->capture_default_str();
  transfer_cmd->add_option("--batch-size", tf.batch_size, "Batch size")->capture_default_str();
  transfer_cmd->add_option("--lr", tf.lr, "Adam learning rate")->capture_default_str();
  transfer_cmd->add_option("--threshold", tf.threshold, "Threshold for --decision threshold")->capture_default_str();
  transfer_cmd->add_option("--decision", tf.decision, "argmax or threshold")->capture_default_str();
  transfer_cmd->add_option("--dataset-name", tf.dataset_name, "Name in the report (default: target file stem)");
  transfer_cmd->add_option("--json", tf.json, "Report JSON path (default: stdout)")->check(kWritablePath);
  transfer_cmd->add_option("--csv", tf.csv, "Summary CSV path")->check(kWritablePath);
  transfer_cmd->add_option("--runs-csv", tf.runs_csv, "Per-run CSV path")->check(kWritablePath);
  add_encoder_flags(transfer_cmd, tf.encoder);
  add_common(transfer_cmd, tf.common);

  GradcheckArgs gc;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every primitive and task loss");
  grad_cmd->add_option("--eps", gc.eps, "Central-difference step")->capture_default_str();
  grad_cmd->add_option("--trials", gc.trials, "Random shapes per primitive")->capture_default_str();
  grad_cmd->add_option("--json", gc.json, "Report JSON path (default: stdout)")->check(kWritablePath);
  add_common(grad_cmd, gc.common);

  StatsArgs st;
  auto* stats_cmd = app.add_subcommand("stats", "Label distribution report for a primary TSV");
  stats_cmd->add_option("--data", st.data, "Primary TSV")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--defs", st.defs, "Definitions TSV (default: built-in 28 labels)")->check(CLI::ExistingFile);
  stats_cmd->add_option("--split", st.split, "Split name for the report")->capture_default_str();
  stats_cmd->add_option("--json", st.json, "Report JSON path (default: stdout)")->check(kWritablePath);
  add_common(stats_cmd, st.common);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand help requests surface here with the subcommand selected.
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      for (auto* sub : app.get_subcommands()) {
        out << sub->help();
        return kExitOk;
      }
      out << app.help();
      return kExitOk;
    }
    err << "usage error: " << e.what() << '\n';
    for (auto* sub : app.get_subcommands()) err << "run '" << sub->get_name() << " --help' for options\n";
    return kExitUsage;
  }

  try {
    if (*aux_cmd) return cmd_build_aux(aux, out, err);
    if (*train_cmd) return cmd_train(tr, out, err);
    if (*eval_cmd) return cmd_evaluate(ev, out, err);
    if (*predict_cmd) return cmd_predict(pr, out, err);
    if (*transfer_cmd) return cmd_transfer(tf, out, err);
    if (*grad_cmd) return cmd_gradcheck(gc, out, err);
    if (*stats_cmd) return cmd_stats(st, out, err);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace defemo
