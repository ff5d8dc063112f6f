// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "defemo/checkpoint.hpp"
#include "defemo/cli.hpp"
#include "defemo/data.hpp"
#include "defemo/error.hpp"
#include "defemo/eval.hpp"
#include "defemo/experiment.hpp"
#include "defemo/gradsuite.hpp"
#include "defemo/trainer.hpp"
#include "defemo/transfer.hpp"

namespace fs = std::filesystem;
using namespace defemo;

namespace {

const fs::path kData = DEFEMO_DATA_DIR;
const fs::path kOut = "acceptance_out";

// Tolerances and budgets.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradBudgetSec = 60.0;
constexpr double kOverfitF1 = 0.95;
constexpr std::size_t kOverfitSteps = 300;
constexpr double kOverfitBudgetSec = 60.0;
constexpr std::size_t kSamplerDraws = 10000;
constexpr double kSamplerLo = 0.485;
constexpr double kSamplerHi = 0.515;
constexpr int kAuxTrials = 1000;
constexpr std::size_t kMinMaskable = 10000;
constexpr double kSigmas = 3.0;
constexpr int kMetricTrials = 1000;
constexpr double kMetricTolerance = 1e-12;
constexpr std::size_t kCorruptionProbes = 4000;
constexpr double kProtocolBudgetSec = 600.0;
constexpr std::size_t kTransferSplits = 10;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

Vocabulary vocab_for(std::span<const PrimaryExample> train, const DefinitionTable& defs) {
  std::vector<std::string> corpus;
  for (const auto& ex : train) corpus.push_back(ex.text);
  for (const auto& d : defs.definitions) corpus.push_back(d);
  return Vocabulary::build(corpus, 1, 30000);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

// ---- 1 -------------------------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  SuiteOptions opts;
  opts.tolerance = kGradTolerance;
  auto entries = primitive_gradcheck_suite(opts);
  const auto enc = encoder_gradcheck_suite(opts);
  entries.insert(entries.end(), enc.begin(), enc.end());
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  std::size_t failed = 0, zeros = 0;
  for (const auto& e : entries) {
    if (!entry_passes(e, opts)) ++failed;
    if (e.structural_zero) {
      ++zeros;
    } else if (e.max_rel_error >= worst) {
      worst = e.max_rel_error;
      worst_name = e.name;
    }
  }
  write_file(kOut / "gradcheck.json", suite_to_json(entries, opts).dump(2) + "\n");
  return {failed == 0 && worst < kGradTolerance && secs < kGradBudgetSec,
          std::to_string(entries.size()) + " checks (" + std::to_string(zeros) + " structural zero), max rel error " +
              fmt(worst) + " at " + worst_name + ", " + fmt(secs, 3) + " s"};
}

// ---- 2 -------------------------------------------------------------------------------------

Outcome overfit() {
  const auto defs = load_definitions(kData / "synthetic" / "overfit6_definitions.tsv");
  const auto train_set = load_primary_tsv(kData / "synthetic" / "overfit6_train.tsv", defs.size());
  const auto vocab = vocab_for(train_set, defs);
  EncoderConfig enc;
  enc.vocab_size = vocab.size();
  enc.num_labels = defs.size();
  TrainConfig cfg;
  cfg.setup = Setup::ClassificationOnly;
  cfg.seed = 1;
  const std::size_t per_epoch = (train_set.size() + cfg.batch_size - 1) / cfg.batch_size;
  cfg.epochs = kOverfitSteps / per_epoch;
  TrainInputs in;
  in.primary = train_set;
  in.defs = &defs;
  in.vocab = &vocab;
  const auto t0 = Clock::now();
  const auto r = train(enc, cfg, in);
  const auto rep = evaluate(r.model, vocab, train_set, cfg.threshold, Decision::Threshold, "train", defs.names,
                            cfg.max_len);
  const double secs = seconds_since(t0);
  return {r.steps.size() <= kOverfitSteps && rep.macro_f1 >= kOverfitF1 && secs < kOverfitBudgetSec,
          std::to_string(train_set.size()) + " examples, " + std::to_string(defs.size()) + " labels, " +
              std::to_string(r.steps.size()) + " steps, train macro-F1 " + fmt(rep.macro_f1) + ", " + fmt(secs, 3) +
              " s"};
}

// ---- 3 -------------------------------------------------------------------------------------

Outcome sampler() {
  Rng rng = make_stream(2024, 1);
  std::size_t half = 0, ones = 0, zeros = 0;
  for (std::size_t i = 0; i < kSamplerDraws; ++i) half += sample_task(rng, 0.5) == Task::Primary;
  for (std::size_t i = 0; i < kSamplerDraws; ++i) ones += sample_task(rng, 1.0) == Task::Primary;
  for (std::size_t i = 0; i < kSamplerDraws; ++i) zeros += sample_task(rng, 0.0) == Task::Primary;
  const double frac = static_cast<double>(half) / static_cast<double>(kSamplerDraws);
  return {frac >= kSamplerLo && frac <= kSamplerHi && ones == kSamplerDraws && zeros == 0,
          "p=0.5 primary fraction " + fmt(frac) + ", p=1.0 " + std::to_string(ones) + "/" +
              std::to_string(kSamplerDraws) + ", p=0.0 " + std::to_string(zeros) + "/" + std::to_string(kSamplerDraws)};
}

// ---- 4 -------------------------------------------------------------------------------------

Outcome aux_builder() {
  Rng gen(404);
  std::size_t bad_count = 0, bad_half = 0, bad_negative = 0, bad_positive = 0, instances = 0;
  for (int trial = 0; trial < kAuxTrials; ++trial) {
    const std::size_t L = 2 + gen() % 27;
    DefinitionTable defs;
    for (std::size_t l = 0; l < L; ++l) {
      defs.names.push_back("label" + std::to_string(l));
      defs.definitions.push_back("definition " + std::to_string(l));
    }
    const std::size_t n = 1 + gen() % 40;
    std::vector<PrimaryExample> ex;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t card = 1 + gen() % std::min<std::size_t>(L - 1, 4);
      std::set<int> gold;
      while (gold.size() < card) gold.insert(static_cast<int>(gen() % L));
      pairs += gold.size();
      ex.push_back({std::to_string(i), "text " + std::to_string(i), LabelSet(gold.begin(), gold.end())});
    }
    Rng rng = make_stream(static_cast<std::uint64_t>(trial), 4);
    const auto aux = build_aux_dataset(ex, defs, rng);
    instances += aux.size();
    bad_count += aux.size() != 2 * pairs;
    const auto pos = static_cast<std::size_t>(
        std::count_if(aux.begin(), aux.end(), [](const AuxExample& a) { return a.relation == Relation::IsDefinition; }));
    bad_half += 2 * pos != aux.size();
    for (const auto& a : aux) {
      const auto& gold = ex[a.source].labels;
      const bool in_gold = std::binary_search(gold.begin(), gold.end(), a.def_label);
      if (a.relation == Relation::IsNotDefinition && in_gold) ++bad_negative;
      if (a.relation == Relation::IsDefinition && !in_gold) ++bad_positive;
    }
  }
  return {bad_count + bad_half + bad_negative + bad_positive == 0,
          std::to_string(kAuxTrials) + " datasets, " + std::to_string(instances) + " instances; count violations " +
              std::to_string(bad_count) + ", balance violations " + std::to_string(bad_half) +
              ", negatives inside gold " + std::to_string(bad_negative) + ", positives outside gold " +
              std::to_string(bad_positive)};
}

// ---- 5 -------------------------------------------------------------------------------------

Outcome masking() {
  std::vector<std::string> words;
  for (int i = 0; i < 200; ++i) words.push_back("w" + std::to_string(i));
  const auto vocab = Vocabulary::from_tokens(words);
  Rng gen(505);
  Rng rng = make_stream(505, 5);
  std::size_t maskable = 0, selected = 0, masked = 0, randomized = 0, kept = 0, special_hits = 0, sequences = 0;
  while (maskable < 5 * kMinMaskable) {
    std::string text, def;
    const std::size_t tn = 10 + gen() % 30, dn = 5 + gen() % 10;
    for (std::size_t i = 0; i < tn; ++i) text += words[gen() % words.size()] + " ";
    for (std::size_t i = 0; i < dn; ++i) def += words[gen() % words.size()] + " ";
    auto seq = encode_pair(text, def, vocab, 64, {.trailing_sep = sequences % 2 == 1});
    // A padded tail, as in a batch.
    for (std::size_t k = 0; k < sequences % 4; ++k) {
      seq.ids.push_back(kPadId);
      seq.segment_ids.push_back(0);
    }
    const auto m = apply_mlm_masking(seq, vocab.size(), rng);
    ++sequences;
    for (TokenId id : seq.ids) maskable += !is_special(id);
    selected += m.mask_positions.size();
    for (std::size_t k = 0; k < m.mask_positions.size(); ++k) {
      if (is_special(seq.ids[m.mask_positions[k]])) ++special_hits;
      switch (m.actions[k]) {
        case MaskAction::Mask: ++masked; break;
        case MaskAction::Random: ++randomized; break;
        case MaskAction::Keep: ++kept; break;
      }
    }
  }
  const double n = static_cast<double>(maskable);
  const double s = static_cast<double>(selected);
  const double frac = s / n;
  const double sel_sigma = std::sqrt(0.15 * 0.85 / n);
  auto within = [&](double count, double p) { return std::abs(count / s - p) <= kSigmas * std::sqrt(p * (1 - p) / s); };
  const bool ok = std::abs(frac - 0.15) <= kSigmas * sel_sigma && within(static_cast<double>(masked), 0.8) &&
                  within(static_cast<double>(randomized), 0.1) && within(static_cast<double>(kept), 0.1) &&
                  special_hits == 0;
  return {ok, std::to_string(maskable) + " maskable tokens, selected " + fmt(frac) + " (0.15 +/- " +
                  fmt(kSigmas * sel_sigma, 2) + "), mask/random/keep " + fmt(masked / s, 3) + "/" +
                  fmt(randomized / s, 3) + "/" + fmt(kept / s, 3) + ", special positions masked " +
                  std::to_string(special_hits)};
}

// ---- 6 -------------------------------------------------------------------------------------

Outcome metric_oracle() {
  Rng gen(606);
  double worst = 0.0;
  for (int trial = 0; trial < kMetricTrials; ++trial) {
    const std::size_t L = 2 + gen() % 10;
    const std::size_t n = 1 + gen() % 40;
    std::vector<LabelSet> golds(n), preds(n);
    auto random_multiset = [&](std::size_t max_card) {
      std::vector<int> v;
      const std::size_t card = gen() % (max_card + 1);
      for (std::size_t k = 0; k < card; ++k) v.push_back(static_cast<int>(gen() % L));
      return v;
    };
    std::vector<std::vector<int>> raw_g(n), raw_p(n);
    for (std::size_t i = 0; i < n; ++i) {
      raw_g[i] = random_multiset(3);
      raw_p[i] = random_multiset(4);
      std::set<int> g(raw_g[i].begin(), raw_g[i].end()), p(raw_p[i].begin(), raw_p[i].end());
      golds[i] = {g.begin(), g.end()};
      preds[i] = {p.begin(), p.end()};
    }
    const auto report = make_report(per_class_prf(golds, preds, L), {}, "oracle");
    double macro_ref = 0.0;
    for (std::size_t c = 0; c < L; ++c) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const bool in_g = std::find(raw_g[i].begin(), raw_g[i].end(), static_cast<int>(c)) != raw_g[i].end();
        const bool in_p = std::find(raw_p[i].begin(), raw_p[i].end(), static_cast<int>(c)) != raw_p[i].end();
        tp += in_g && in_p;
        fp += !in_g && in_p;
        fn += in_g && !in_p;
      }
      const double pr = tp + fp > 0 ? tp / (tp + fp) : 0.0;
      const double rc = tp + fn > 0 ? tp / (tp + fn) : 0.0;
      const double f1 = pr + rc > 0 ? 2 * pr * rc / (pr + rc) : 0.0;
      const auto& m = report.per_class[c];
      worst = std::max({worst, std::abs(m.precision - pr), std::abs(m.recall - rc), std::abs(m.f1 - f1)});
      macro_ref += f1;
    }
    worst = std::max(worst, std::abs(report.macro_f1 - macro_ref / static_cast<double>(L)));
  }
  const std::vector<LabelSet> gold = {{0}}, pred = {{0, 1}};
  const double hand = make_report(per_class_prf(gold, pred, 2), {"A", "B"}, "hand").macro_f1;
  return {worst <= kMetricTolerance && hand == 0.5,
          std::to_string(kMetricTrials) + " random cases, max deviation " + fmt(worst) + ", hand case macro-F1 " +
              fmt(hand)};
}

// ---- 7 -------------------------------------------------------------------------------------

Outcome thresholds() {
  const std::vector<double> a = {0.9, 0.2, 0.31}, b = {0.3, 0.3, 0.3}, c = {0.1, 0.29, 0.05};
  const auto ra = predict_label_set(a, 0.3);
  const auto rb = predict_label_set(b, 0.3);
  const auto rc = predict_label_set(c, 0.3);
  auto show = [](const LabelSet& s) {
    std::string out = "{";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "}";
  };
  return {ra == LabelSet{0, 2} && rb.empty() && rc.empty(),
          "[0.9,0.2,0.31] -> " + show(ra) + ", all exactly 0.3 -> " + show(rb) + ", all below -> " + show(rc)};
}

// ---- 8 -------------------------------------------------------------------------------------

std::vector<std::string> determinism_train_args(const fs::path& out) {
  const auto syn = kData / "synthetic";
  return {"train", "--train", (syn / "goemo8_train.tsv").string(), "--dev", (syn / "goemo8_dev.tsv").string(),
          "--defs", (syn / "goemo8_definitions.tsv").string(), "--out", out.string(), "--setup", "cdp_mlm", "--p",
          "0.5", "--seed", "7", "--epochs", "2"};
}

Outcome determinism(fs::path& checkpoint_out) {
  const auto a = kOut / "det_a.ckpt", b = kOut / "det_b.ckpt";
  std::ostringstream out_a, out_b, err;
  const int ca = run_cli(determinism_train_args(a), out_a, err);
  const int cb = run_cli(determinism_train_args(b), out_b, err);
  if (ca != 0 || cb != 0) return {false, "train failed: " + err.str()};
  const auto bytes_a = slurp(a), bytes_b = slurp(b);
  const bool same_ckpt = bytes_a == bytes_b;
  const bool same_log = slurp(a.string() + ".log.jsonl") == slurp(b.string() + ".log.jsonl");

  const auto loaded = deserialize_checkpoint(bytes_a);
  const bool identity = serialize_checkpoint(loaded) == bytes_a &&
                        serialize_checkpoint(make_checkpoint(model_from_checkpoint(loaded), loaded.train,
                                                             loaded.label_names, loaded.vocab_fingerprint)) == bytes_a;

  // Single-byte corruption anywhere in the payload or checksum.
  const std::size_t start = bytes_a.find("\n\n") + 2;
  const std::size_t region = bytes_a.size() - start;
  Rng rng(808);
  std::size_t detected = 0;
  for (std::size_t k = 0; k < kCorruptionProbes; ++k) {
    const std::size_t pos = k < 8 ? bytes_a.size() - 1 - k : start + rng() % region;
    auto bad = bytes_a;
    bad[pos] = static_cast<char>(bad[pos] ^ static_cast<char>(1 + rng() % 255));
    try {
      deserialize_checkpoint(bad);
    } catch (const CheckpointError& e) {
      detected += e.kind() == CheckpointError::Kind::ChecksumMismatch;
    }
  }
  checkpoint_out = a;
  return {same_ckpt && same_log && identity && detected == kCorruptionProbes,
          std::string("checkpoints ") + (same_ckpt ? "identical" : "DIFFER") + " (" + std::to_string(bytes_a.size()) +
              " bytes), logs " + (same_log ? "identical" : "DIFFER") + ", round trip " +
              (identity ? "identity" : "NOT identity") + ", corruption detected " + std::to_string(detected) + "/" +
              std::to_string(kCorruptionProbes)};
}

// ---- 9 -------------------------------------------------------------------------------------

Outcome protocol() {
  const auto syn = kData / "synthetic";
  const auto defs = load_definitions(syn / "goemo8_definitions.tsv");
  const auto train_set = load_primary_tsv(syn / "goemo8_train.tsv", defs.size());
  const auto dev = load_primary_tsv(syn / "goemo8_dev.tsv", defs.size());
  const auto test = load_primary_tsv(syn / "goemo8_test.tsv", defs.size());
  const auto vocab = vocab_for(train_set, defs);
  ProtocolOptions opts;
  opts.encoder.vocab_size = vocab.size();
  opts.encoder.num_labels = defs.size();
  opts.train.epochs = 10;
  opts.train.seed = 1;
  const auto t0 = Clock::now();
  const auto report = run_protocol(train_set, dev, test, defs, vocab, opts);
  const double secs = seconds_since(t0);
  write_file(kOut / "protocol.json", protocol_to_json(report).dump(2) + "\n");
  write_file(kOut / "setup_table.csv", setup_table_csv(report));
  write_file(kOut / "sweep_table.csv", sweep_table_csv(report));

  const std::size_t total = train_set.size() + dev.size() + test.size();
  bool shape = report.table.size() == 4 && report.sweep.size() == 27;
  const std::vector<Setup> order = {Setup::ClassificationOnly, Setup::Cdp, Setup::Mlm, Setup::CdpMlm};
  for (std::size_t i = 0; shape && i < 4; ++i) shape = report.table[i].setup == order[i];
  for (const auto& r : report.sweep) shape = shape && std::isfinite(r.test.macro_f1) && r.test.per_class.size() == 8;
  std::string deltas;
  for (std::size_t i = 1; i < report.table.size(); ++i) {
    deltas += std::string(i > 1 ? ", " : "") + std::string(setup_name(report.table[i].setup)) + " " +
              fmt(report.table[i].test.macro_f1 - report.table[0].test.macro_f1, 3);
  }
  return {shape && total <= 2000 && secs < kProtocolBudgetSec,
          std::to_string(total) + " examples, " + std::to_string(report.table.size()) + " setups + " +
              std::to_string(report.sweep.size()) + " sweep runs in " + fmt(secs, 4) +
              " s; baseline test macro-F1 " + fmt(report.table[0].test.macro_f1, 3) + ", deltas " + deltas};
}

// ---- 10 ------------------------------------------------------------------------------------

Outcome transfer(const fs::path& checkpoint) {
  const auto target = load_target_tsv(kData / "synthetic" / "target7.tsv");
  const auto ckpt = load_checkpoint(checkpoint);
  const auto vocab = Vocabulary::load(checkpoint.string() + ".vocab");
  check_compatible(ckpt, ckpt.encoder.num_labels, vocab);
  const auto source = model_from_checkpoint(ckpt);

  TransferPlan plan;
  plan.sizes = {{false, 100}, {false, 200}, {false, 500}};
  plan.n_splits = kTransferSplits;
  plan.seed = 10;

  const auto splits = make_transfer_splits(target.examples.size(), plan);
  bool disjoint = splits.size() == 3 * kTransferSplits;
  for (const auto& s : splits) {
    std::vector<std::size_t> both;
    std::set_intersection(s.train_ids.begin(), s.train_ids.end(), s.test_ids.begin(), s.test_ids.end(),
                          std::back_inserter(both));
    disjoint = disjoint && both.empty() && s.train_ids.size() == s.size &&
               s.train_ids.size() + s.test_ids.size() == target.examples.size();
  }
  const auto again = make_transfer_splits(target.examples.size(), plan);
  bool reproducible = true;
  for (std::size_t i = 0; i < splits.size(); ++i) reproducible = reproducible && splits[i].train_ids == again[i].train_ids;

  const auto reinit = reinit_classifier_head(source, target.label_names.size(), 99);
  bool preserved = reinit.config().num_labels == target.label_names.size();
  std::size_t backbone = 0;
  for (std::size_t i = 0; i < source.parameters().size(); ++i) {
    if (source.parameters()[i].name.starts_with("head.emotion")) continue;
    ++backbone;
    preserved = preserved && reinit.parameters()[i].value == source.parameters()[i].value;
  }

  TransferOptions opts;
  opts.finetune.epochs = 3;
  opts.finetune.seed = 0;
  opts.fresh_encoder = ckpt.encoder;
  std::vector<Initializer> inits = {{"fresh", std::nullopt}, {"cdp_mlm", source}};
  const auto t0 = Clock::now();
  const auto report = run_transfer_sweep("target7", target, inits, vocab, plan, opts);
  const double secs = seconds_since(t0);
  write_file(kOut / "transfer.json", transfer_to_json(report).dump(2) + "\n");
  write_file(kOut / "transfer.csv", transfer_to_csv(report));
  write_file(kOut / "transfer_runs.csv", transfer_runs_to_csv(report));

  bool shape = report.cells.size() == 6;
  for (const auto& c : report.cells) shape = shape && c.n_runs == kTransferSplits && std::isfinite(c.std_macro_f1);
  // Runs consume the planned splits, and both initializers see the same ones.
  bool hashes = report.runs.size() == 2 * splits.size();
  for (std::size_t i = 0; hashes && i < report.runs.size(); ++i) {
    hashes = report.runs[i].train_ids_hash == hash_ids(splits[i % splits.size()].train_ids);
  }

  TransferPlan first = plan;
  first.sizes = {plan.sizes.front()};
  const auto rerun = run_transfer_sweep("target7", target, inits, vocab, first, opts);
  bool rerun_same = rerun.runs.size() == 2 * kTransferSplits;
  for (std::size_t k = 0; rerun_same && k < kTransferSplits; ++k) {
    rerun_same = rerun.runs[k].macro_f1 == report.runs[k].macro_f1 &&
                 rerun.runs[kTransferSplits + k].macro_f1 == report.runs[splits.size() + k].macro_f1;
  }

  std::string cells;
  for (const auto& c : report.cells) {
    cells += (cells.empty() ? "" : ", ") + c.initializer + "@" + c.size_label + " " + fmt(c.mean_macro_f1, 3) + "+/-" +
             fmt(c.std_macro_f1, 2);
  }
  return {disjoint && reproducible && preserved && shape && hashes && rerun_same,
          std::to_string(splits.size()) + " splits " + (disjoint ? "disjoint" : "OVERLAP") + ", " +
              (reproducible && rerun_same ? "seed-reproducible" : "NOT reproducible") + ", " +
              std::to_string(backbone) + " backbone tensors " + (preserved ? "bitwise preserved" : "CHANGED") + ", " +
              fmt(secs, 4) + " s; " + cells};
}

}  // namespace

int main() {
  fs::create_directories(kOut);
  int failures = 0;
  fs::path checkpoint;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"overfit", overfit},
      {"sampler statistics", sampler},
      {"auxiliary builder", aux_builder},
      {"masking statistics", masking},
      {"metric oracle", metric_oracle},
      {"threshold inference", thresholds},
      {"determinism and checkpoints", [&] { return determinism(checkpoint); }},
      {"protocol shape", protocol},
      {"transfer sweep", [&] { return transfer(checkpoint); }},
  };
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << i + 1 << ". " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
