#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "defemo/data.hpp"
#include "defemo/model.hpp"
#include "defemo/tokenizer.hpp"

namespace defemo {

// {i : probs[i] > threshold}. May be empty.
LabelSet predict_label_set(std::span<const double> probs, double threshold);

// Index of the largest probability, lowest index on ties.
int argmax_label(std::span<const double> probs);

struct ClassMetrics {
  int label = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::size_t support = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Per-class counts and P/R/F1; a metric is 0 when its denominator is 0.
std::vector<ClassMetrics> per_class_prf(std::span<const LabelSet> golds, std::span<const LabelSet> preds,
                                        std::size_t num_labels);

struct MetricsReport {
  std::string split;
  std::vector<std::string> label_names;
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  // Population standard deviation of per-class F1.
  double std_f1 = 0.0;
  nlohmann::json config = nlohmann::json::object();
};

// Macro values average over every class, including zero-support ones.
MetricsReport make_report(std::vector<ClassMetrics> per_class, std::vector<std::string> label_names,
                          std::string split);

nlohmann::json report_to_json(const MetricsReport& report);
// label,name,precision,recall,f1,support rows followed by macro-average and std.
std::string report_to_csv(const MetricsReport& report);

// ThresholdOrArgmax falls back to the argmax label when no probability
// crosses the threshold.
enum class Decision { Threshold, Argmax, ThresholdOrArgmax };

std::string_view decision_name(Decision d);

// Eval-mode sigmoid probabilities, one row per text.
std::vector<std::vector<double>> predict_probabilities(const Model<float>& model, const Vocabulary& vocab,
                                                       std::span<const std::string> texts, std::size_t max_len,
                                                       std::size_t batch_size = 64);

std::vector<LabelSet> decide(const std::vector<std::vector<double>>& probs, Decision decision, double threshold);

MetricsReport evaluate(const Model<float>& model, const Vocabulary& vocab, std::span<const PrimaryExample> examples,
                       double threshold, Decision decision, std::string split,
                       std::vector<std::string> label_names, std::size_t max_len);

}  // namespace defemo
