#include "defemo/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "defemo/error.hpp"
#include "defemo/trainer.hpp"

namespace defemo {

namespace {

ProtocolRun run_one(Setup setup, double p, std::span<const PrimaryExample> train_set, std::span<const PrimaryExample> dev,
                    std::span<const PrimaryExample> test, const DefinitionTable& defs, const Vocabulary& vocab,
                    const ProtocolOptions& options) {
  TrainConfig cfg = options.train;
  cfg.setup = setup;
  cfg.primary_prob = setup == Setup::ClassificationOnly ? 1.0 : p;
  TrainInputs inputs;
  inputs.primary = train_set;
  inputs.defs = &defs;
  inputs.vocab = &vocab;
  auto result = train(options.encoder, cfg, inputs);
  ProtocolRun run;
  run.setup = setup;
  run.primary_prob = cfg.primary_prob;
  run.dev = evaluate(result.model, vocab, dev, cfg.threshold, Decision::Threshold, "dev", defs.names, cfg.max_len);
  run.test = evaluate(result.model, vocab, test, cfg.threshold, Decision::Threshold, "test", defs.names, cfg.max_len);
  for (const auto& s : result.steps) run.primary_steps += s.task == Task::Primary;
  run.total_steps = result.steps.size();
  return run;
}

bool same_prob(double a, double b) { return std::abs(a - b) < 1e-12; }

nlohmann::json run_to_json(const ProtocolRun& r) {
  auto macro = [](const MetricsReport& m) {
    return nlohmann::json{{"precision", m.macro_precision}, {"recall", m.macro_recall}, {"f1", m.macro_f1},
                          {"std_f1", m.std_f1}};
  };
  return {{"setup", setup_name(r.setup)}, {"p", r.primary_prob},   {"dev", macro(r.dev)},
          {"test", macro(r.test)},        {"primary_steps", r.primary_steps}, {"total_steps", r.total_steps}};
}

double baseline_f1(const ProtocolReport& report) {
  for (const auto& r : report.table) {
    if (r.setup == Setup::ClassificationOnly) return r.test.macro_f1;
  }
  return std::nan("");
}

}  // namespace

ProtocolReport run_protocol(std::span<const PrimaryExample> train_set, std::span<const PrimaryExample> dev,
                            std::span<const PrimaryExample> test, const DefinitionTable& defs,
                            const Vocabulary& vocab, const ProtocolOptions& options, const ProgressFn& progress) {
  if (train_set.empty() || dev.empty() || test.empty()) throw DataError("protocol: train, dev and test must be non-empty");
  ProtocolReport report;
  auto note = [&](const ProtocolRun& r) {
    if (progress) {
      std::ostringstream msg;
      msg << setup_name(r.setup) << " p=" << r.primary_prob << " test macro-F1=" << r.test.macro_f1;
      progress(msg.str());
    }
  };
  for (Setup s : options.sweep_setups) {
    if (s == Setup::ClassificationOnly) throw ConfigError("protocol: classification_only has no p to sweep");
    for (double p : options.sweep_probs) {
      report.sweep.push_back(run_one(s, p, train_set, dev, test, defs, vocab, options));
      note(report.sweep.back());
    }
  }
  for (Setup s : options.setups) {
    const ProtocolRun* reuse = nullptr;
    for (const auto& r : report.sweep) {
      if (s != Setup::ClassificationOnly && r.setup == s && same_prob(r.primary_prob, options.table_prob)) reuse = &r;
    }
    if (reuse) {
      report.table.push_back(*reuse);
    } else {
      report.table.push_back(run_one(s, options.table_prob, train_set, dev, test, defs, vocab, options));
      note(report.table.back());
    }
  }
  return report;
}

nlohmann::json protocol_to_json(const ProtocolReport& report) {
  nlohmann::json j;
  const double base = baseline_f1(report);
  auto& table = j["setup_table"] = nlohmann::json::array();
  for (const auto& r : report.table) {
    auto row = run_to_json(r);
    row["delta_f1_vs_classification_only"] = std::isnan(base) ? nlohmann::json(nullptr) : nlohmann::json(r.test.macro_f1 - base);
    table.push_back(row);
  }
  auto& sweep = j["p_sweep"] = nlohmann::json::array();
  for (const auto& r : report.sweep) sweep.push_back(run_to_json(r));
  auto& best = j["best_p"] = nlohmann::json::object();
  std::map<std::string, std::pair<double, double>> best_by_setup;
  for (const auto& r : report.sweep) {
    const std::string name(setup_name(r.setup));
    auto it = best_by_setup.find(name);
    if (it == best_by_setup.end() || r.test.macro_f1 > it->second.second) {
      best_by_setup[name] = {r.primary_prob, r.test.macro_f1};
    }
  }
  for (const auto& [name, pf] : best_by_setup) best[name] = {{"p", pf.first}, {"test_macro_f1", pf.second}};
  return j;
}

std::string setup_table_csv(const ProtocolReport& report) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  const double base = baseline_f1(report);
  out << "setup,p,precision,recall,f1,delta_f1\n";
  for (const auto& r : report.table) {
    out << setup_name(r.setup) << ',' << r.primary_prob << ',' << r.test.macro_precision << ','
        << r.test.macro_recall << ',' << r.test.macro_f1 << ',';
    if (!std::isnan(base)) out << r.test.macro_f1 - base;
    out << '\n';
  }
  return out.str();
}

std::string sweep_table_csv(const ProtocolReport& report) {
  std::vector<Setup> setups;
  std::vector<double> probs;
  for (const auto& r : report.sweep) {
    if (std::find(setups.begin(), setups.end(), r.setup) == setups.end()) setups.push_back(r.setup);
    if (std::find_if(probs.begin(), probs.end(), [&](double p) { return same_prob(p, r.primary_prob); }) ==
        probs.end()) {
      probs.push_back(r.primary_prob);
    }
  }
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << 'p';
  for (Setup s : setups) out << ',' << setup_name(s);
  out << '\n';
  for (double p : probs) {
    out << p;
    for (Setup s : setups) {
      out << ',';
      for (const auto& r : report.sweep) {
        if (r.setup == s && same_prob(r.primary_prob, p)) out << r.test.macro_f1;
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace defemo
