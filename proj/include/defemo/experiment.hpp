#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "defemo/data.hpp"
#include "defemo/eval.hpp"
#include "defemo/model.hpp"
#include "defemo/tokenizer.hpp"
#include "defemo/train_config.hpp"

namespace defemo {

// Setup comparison plus a sweep over the primary-task probability.
struct ProtocolOptions {
  EncoderConfig encoder;
  TrainConfig train;
  std::vector<Setup> setups = {Setup::ClassificationOnly, Setup::Cdp, Setup::Mlm, Setup::CdpMlm};
  std::vector<double> sweep_probs = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<Setup> sweep_setups = {Setup::Cdp, Setup::Mlm, Setup::CdpMlm};
  // Probability used for the multi-task rows of the setup table.
  double table_prob = 0.5;
};

struct ProtocolRun {
  Setup setup = Setup::ClassificationOnly;
  double primary_prob = 1.0;
  MetricsReport dev;
  MetricsReport test;
  std::size_t primary_steps = 0;
  std::size_t total_steps = 0;
};

struct ProtocolReport {
  // One row per setup; multi-task rows reuse the sweep run at table_prob.
  std::vector<ProtocolRun> table;
  std::vector<ProtocolRun> sweep;
};

using ProgressFn = std::function<void(const std::string&)>;

ProtocolReport run_protocol(std::span<const PrimaryExample> train, std::span<const PrimaryExample> dev,
                            std::span<const PrimaryExample> test, const DefinitionTable& defs,
                            const Vocabulary& vocab, const ProtocolOptions& options, const ProgressFn& progress = {});

nlohmann::json protocol_to_json(const ProtocolReport& report);
// setup,p,precision,recall,f1,delta_f1 with deltas against classification_only.
std::string setup_table_csv(const ProtocolReport& report);
// p followed by one test macro-F1 column per sweep setup.
std::string sweep_table_csv(const ProtocolReport& report);

}  // namespace defemo
