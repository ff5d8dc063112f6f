#include "defemo/transfer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "defemo/error.hpp"
#include "defemo/hash.hpp"
#include "defemo/trainer.hpp"

namespace defemo {

TrainSize TrainSize::parse(std::string_view text) {
  TrainSize s;
  if (text.ends_with('%')) {
    s.percent = true;
    text.remove_suffix(1);
  }
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size() || !(v > 0.0)) {
    throw ConfigError("bad train size '" + std::string(text) + (s.percent ? "%" : "") + "'");
  }
  if (s.percent && v >= 100.0) throw ConfigError("train size percentage must be below 100");
  if (!s.percent && v != std::floor(v)) throw ConfigError("absolute train size must be an integer");
  s.value = v;
  return s;
}

std::string TrainSize::label() const {
  std::ostringstream out;
  out << value;
  if (percent) out << '%';
  return out.str();
}

std::size_t TrainSize::resolve(std::size_t n) const {
  const auto size = percent ? static_cast<std::size_t>(std::llround(static_cast<double>(n) * value / 100.0))
                            : static_cast<std::size_t>(value);
  if (size < 1 || size >= n) {
    throw ConfigError("train size " + label() + " resolves to " + std::to_string(size) + " for a dataset of " +
                      std::to_string(n) + " examples; it must leave a non-empty test set");
  }
  return size;
}

std::uint64_t hash_ids(const std::vector<std::size_t>& ids) {
  std::vector<std::uint64_t> wide(ids.begin(), ids.end());
  return fnv1a64(std::as_bytes(std::span<const std::uint64_t>(wide)));
}

std::vector<TransferSplit> make_transfer_splits(std::size_t dataset_size, const TransferPlan& plan) {
  if (plan.n_splits < 1) throw ConfigError("transfer: n_splits must be >= 1");
  if (plan.sizes.empty()) throw ConfigError("transfer: no train sizes");
  std::vector<TransferSplit> out;
  for (std::size_t si = 0; si < plan.sizes.size(); ++si) {
    const std::size_t size = plan.sizes[si].resolve(dataset_size);
    for (std::size_t k = 0; k < plan.n_splits; ++k) {
      Rng rng = make_stream(plan.seed, 1000 + si * 1000 + k);
      std::vector<std::size_t> perm(dataset_size);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = 0; i < size; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, dataset_size - 1);
        std::swap(perm[i], perm[pick(rng)]);
      }
      TransferSplit s;
      s.size_label = plan.sizes[si].label();
      s.size = size;
      s.split_index = k;
      s.train_ids.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(size));
      s.test_ids.assign(perm.begin() + static_cast<std::ptrdiff_t>(size), perm.end());
      std::sort(s.train_ids.begin(), s.train_ids.end());
      std::sort(s.test_ids.begin(), s.test_ids.end());
      out.push_back(std::move(s));
    }
  }
  return out;
}

Model<float> reinit_classifier_head(const Model<float>& source, std::size_t new_labels, std::uint64_t seed) {
  if (new_labels < 2) throw ConfigError("reinit_classifier_head: need at least 2 labels, got " +
                                        std::to_string(new_labels));
  EncoderConfig config = source.config();
  config.num_labels = new_labels;
  Rng rng = make_stream(seed, 77);
  std::vector<Parameter<float>> params;
  for (const auto& [name, shape] : Model<float>::manifest(config)) {
    if (name.starts_with("head.emotion.")) {
      params.push_back({name, init_tensor<float>(name, shape, rng)});
    } else {
      params.push_back(source.parameter(name));
    }
  }
  return Model<float>(config, std::move(params));
}

namespace {

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

}  // namespace

TransferReport run_transfer_sweep(const std::string& dataset_name, const TargetDataset& dataset,
                                  const std::vector<Initializer>& initializers, const Vocabulary& vocab,
                                  const TransferPlan& plan, const TransferOptions& options) {
  const std::size_t labels = dataset.label_names.size();
  if (labels < 2) throw DataError("transfer: target dataset needs at least 2 labels");
  if (initializers.empty()) throw ConfigError("transfer: no initializers");
  for (const auto& init : initializers) {
    if (init.source && init.source->config().vocab_size != vocab.size()) {
      throw CheckpointError(CheckpointError::Kind::ConfigMismatch,
                            "transfer: initializer '" + init.name + "' was trained with a different vocabulary");
    }
  }
  const auto splits = make_transfer_splits(dataset.examples.size(), plan);

  std::vector<PrimaryExample> all;
  all.reserve(dataset.examples.size());
  for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
    const auto& ex = dataset.examples[i];
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= labels) {
      throw DataError("transfer: example " + std::to_string(i) + " has out-of-range label");
    }
    all.push_back({std::to_string(i), ex.text, {ex.label}});
  }
  DefinitionTable names{dataset.label_names, dataset.label_names};

  TrainConfig ft = options.finetune;
  ft.setup = Setup::ClassificationOnly;
  ft.primary_prob = 1.0;

  struct Job {
    std::size_t init;
    std::size_t split;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < initializers.size(); ++i) {
    for (std::size_t s = 0; s < splits.size(); ++s) jobs.push_back({i, s});
  }
  std::vector<TransferRun> runs(jobs.size());

  auto run_job = [&](std::size_t j) {
    const auto& init = initializers[jobs[j].init];
    const auto& split = splits[jobs[j].split];
    const std::uint64_t run_seed = plan.seed * 1000003ULL + jobs[j].split;
    Model<float> model = [&] {
      if (init.source) return reinit_classifier_head(*init.source, labels, run_seed);
      EncoderConfig enc = options.fresh_encoder;
      enc.vocab_size = vocab.size();
      enc.num_labels = labels;
      enc.seed = run_seed;
      return Model<float>(enc);
    }();
    std::vector<PrimaryExample> train_set, test_set;
    for (auto id : split.train_ids) train_set.push_back(all[id]);
    for (auto id : split.test_ids) test_set.push_back(all[id]);
    TrainConfig cfg = ft;
    cfg.seed = run_seed;
    TrainInputs inputs;
    inputs.primary = train_set;
    inputs.defs = &names;
    inputs.vocab = &vocab;
    auto result = train_model(std::move(model), cfg, inputs);
    const auto report = evaluate(result.model, vocab, test_set, cfg.threshold, options.decision, "test",
                                 dataset.label_names, cfg.max_len);
    runs[j] = {init.name, split.size_label, split.size, split.split_index, hash_ids(split.train_ids),
               report.macro_f1};
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, jobs.size()));
  if (workers == 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run_job(j);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::exception_ptr failure;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t j;
          {
            std::lock_guard lock(mu);
            if (failure || next == jobs.size()) return;
            j = next++;
          }
          try {
            run_job(j);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  TransferReport report;
  report.dataset = dataset_name;
  report.runs = runs;
  for (const auto& init : initializers) {
    for (const auto& size : plan.sizes) {
      TransferCell cell;
      cell.initializer = init.name;
      cell.size_label = size.label();
      std::vector<double> f1s;
      for (const auto& r : runs) {
        if (r.initializer == init.name && r.size_label == cell.size_label) {
          f1s.push_back(r.macro_f1);
          cell.size = r.size;
        }
      }
      cell.n_runs = f1s.size();
      cell.mean_macro_f1 = f1s.empty() ? 0.0 : std::accumulate(f1s.begin(), f1s.end(), 0.0) / f1s.size();
      cell.std_macro_f1 = sample_std(f1s, cell.mean_macro_f1);
      report.cells.push_back(cell);
    }
  }
  return report;
}

nlohmann::json transfer_to_json(const TransferReport& report) {
  nlohmann::json j;
  j["dataset"] = report.dataset;
  auto& cells = j["cells"] = nlohmann::json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"dataset", report.dataset},
                     {"initializer", c.initializer},
                     {"size", c.size_label},
                     {"train_examples", c.size},
                     {"mean_macro_f1", c.mean_macro_f1},
                     {"std_macro_f1", c.std_macro_f1},
                     {"n_runs", c.n_runs}});
  }
  auto& runs = j["runs"] = nlohmann::json::array();
  for (const auto& r : report.runs) {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.train_ids_hash));
    runs.push_back({{"initializer", r.initializer},
                    {"size", r.size_label},
                    {"train_examples", r.size},
                    {"split", r.split_index},
                    {"train_ids_hash", hash},
                    {"macro_f1", r.macro_f1}});
  }
  return j;
}

std::string transfer_to_csv(const TransferReport& report) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "dataset,initializer,size,mean_macro_f1,std_macro_f1,n_runs\n";
  for (const auto& c : report.cells) {
    out << report.dataset << ',' << c.initializer << ',' << c.size_label << ',' << c.mean_macro_f1 << ','
        << c.std_macro_f1 << ',' << c.n_runs << '\n';
  }
  return out.str();
}

std::string transfer_runs_to_csv(const TransferReport& report) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "dataset,initializer,size,split,train_ids_hash,macro_f1\n";
  for (const auto& r : report.runs) {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.train_ids_hash));
    out << report.dataset << ',' << r.initializer << ',' << r.size_label << ',' << r.split_index << ',' << hash
        << ',' << r.macro_f1 << '\n';
  }
  return out.str();
}

}  // namespace defemo
