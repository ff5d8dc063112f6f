#include "defemo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "defemo/error.hpp"

namespace defemo {

std::string_view decision_name(Decision d) {
  switch (d) {
    case Decision::Threshold: return "threshold";
    case Decision::Argmax: return "argmax";
    case Decision::ThresholdOrArgmax: return "threshold_or_argmax";
  }
  return "unknown";
}

LabelSet predict_label_set(std::span<const double> probs, double threshold) {
  LabelSet out;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > threshold) out.push_back(static_cast<int>(i));
  }
  return out;
}

int argmax_label(std::span<const double> probs) {
  if (probs.empty()) throw ShapeError("argmax_label: empty probability vector");
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

std::vector<ClassMetrics> per_class_prf(std::span<const LabelSet> golds, std::span<const LabelSet> preds,
                                        std::size_t num_labels) {
  if (golds.size() != preds.size()) {
    throw ShapeError("per_class_prf: " + std::to_string(golds.size()) + " gold sets vs " +
                     std::to_string(preds.size()) + " predictions");
  }
  std::vector<ClassMetrics> m(num_labels);
  for (std::size_t c = 0; c < num_labels; ++c) m[c].label = static_cast<int>(c);

  std::vector<char> in_gold(num_labels), in_pred(num_labels);
  auto mark = [&](const LabelSet& set, std::vector<char>& flags) {
    std::fill(flags.begin(), flags.end(), 0);
    for (int l : set) {
      if (l < 0 || static_cast<std::size_t>(l) >= num_labels) {
        throw DataError("per_class_prf: label " + std::to_string(l) + " out of range for " +
                        std::to_string(num_labels) + " labels");
      }
      flags[static_cast<std::size_t>(l)] = 1;
    }
  };
  for (std::size_t i = 0; i < golds.size(); ++i) {
    mark(golds[i], in_gold);
    mark(preds[i], in_pred);
    for (std::size_t c = 0; c < num_labels; ++c) {
      if (in_gold[c]) ++m[c].support;
      if (in_gold[c] && in_pred[c]) ++m[c].true_positives;
      if (!in_gold[c] && in_pred[c]) ++m[c].false_positives;
      if (in_gold[c] && !in_pred[c]) ++m[c].false_negatives;
    }
  }
  for (auto& c : m) {
    const double tp = static_cast<double>(c.true_positives);
    const auto pd = c.true_positives + c.false_positives;
    const auto rd = c.true_positives + c.false_negatives;
    c.precision = pd ? tp / static_cast<double>(pd) : 0.0;
    c.recall = rd ? tp / static_cast<double>(rd) : 0.0;
    c.f1 = c.precision + c.recall > 0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
  }
  return m;
}

MetricsReport make_report(std::vector<ClassMetrics> per_class, std::vector<std::string> label_names,
                          std::string split) {
  MetricsReport r;
  r.split = std::move(split);
  r.label_names = std::move(label_names);
  r.per_class = std::move(per_class);
  const double n = static_cast<double>(r.per_class.size());
  if (r.per_class.empty()) return r;
  for (const auto& c : r.per_class) {
    r.macro_precision += c.precision;
    r.macro_recall += c.recall;
    r.macro_f1 += c.f1;
  }
  r.macro_precision /= n;
  r.macro_recall /= n;
  r.macro_f1 /= n;
  double var = 0.0;
  for (const auto& c : r.per_class) var += (c.f1 - r.macro_f1) * (c.f1 - r.macro_f1);
  r.std_f1 = std::sqrt(var / n);
  return r;
}

nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["split"] = report.split;
  j["macro"] = {{"precision", report.macro_precision}, {"recall", report.macro_recall}, {"f1", report.macro_f1}};
  j["std_f1"] = report.std_f1;
  auto& rows = j["per_class"] = nlohmann::json::array();
  for (const auto& c : report.per_class) {
    const auto idx = static_cast<std::size_t>(c.label);
    rows.push_back({{"label", c.label},
                    {"name", idx < report.label_names.size() ? report.label_names[idx] : std::to_string(c.label)},
                    {"precision", c.precision},
                    {"recall", c.recall},
                    {"f1", c.f1},
                    {"support", c.support}});
  }
  if (!report.config.empty()) j["config"] = report.config;
  return j;
}

std::string report_to_csv(const MetricsReport& report) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "label,name,precision,recall,f1,support\n";
  for (const auto& c : report.per_class) {
    const auto idx = static_cast<std::size_t>(c.label);
    out << c.label << ',' << (idx < report.label_names.size() ? report.label_names[idx] : "") << ','
        << c.precision << ',' << c.recall << ',' << c.f1 << ',' << c.support << '\n';
  }
  out << ",macro-average," << report.macro_precision << ',' << report.macro_recall << ',' << report.macro_f1
      << ",\n";
  out << ",std,,," << report.std_f1 << ",\n";
  return out.str();
}

std::vector<std::vector<double>> predict_probabilities(const Model<float>& model, const Vocabulary& vocab,
                                                       std::span<const std::string> texts, std::size_t max_len,
                                                       std::size_t batch_size) {
  if (vocab.size() != model.config().vocab_size) {
    throw CheckpointError(CheckpointError::Kind::ConfigMismatch,
                          "vocabulary has " + std::to_string(vocab.size()) + " tokens, model expects " +
                              std::to_string(model.config().vocab_size));
  }
  const std::size_t len = std::min(max_len, model.config().max_len);
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  const ForwardOptions eval_mode;
  for (std::size_t start = 0; start < texts.size(); start += batch_size) {
    const std::size_t end = std::min(texts.size(), start + batch_size);
    std::vector<TokenSequence> seqs;
    for (std::size_t i = start; i < end; ++i) seqs.push_back(encode_single(texts[i], vocab, len));
    Graph<float> g;
    auto hidden = model.encode(g, pad_batch(seqs), eval_mode);
    auto probs = sigmoid(model.emotion_logits(g, model.pool(g, hidden), eval_mode)).value();
    const std::size_t labels = probs.shape[1];
    for (std::size_t r = 0; r < seqs.size(); ++r) {
      out.emplace_back(probs.data.begin() + static_cast<std::ptrdiff_t>(r * labels),
                       probs.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * labels));
    }
  }
  return out;
}

std::vector<LabelSet> decide(const std::vector<std::vector<double>>& probs, Decision decision, double threshold) {
  std::vector<LabelSet> out;
  out.reserve(probs.size());
  for (const auto& p : probs) {
    if (decision == Decision::Argmax) {
      out.push_back({argmax_label(p)});
      continue;
    }
    auto set = predict_label_set(p, threshold);
    if (set.empty() && decision == Decision::ThresholdOrArgmax) set.push_back(argmax_label(p));
    out.push_back(std::move(set));
  }
  return out;
}

MetricsReport evaluate(const Model<float>& model, const Vocabulary& vocab, std::span<const PrimaryExample> examples,
                       double threshold, Decision decision, std::string split,
                       std::vector<std::string> label_names, std::size_t max_len) {
  if (examples.empty()) throw DataError("evaluate: empty split '" + split + "'");
  const std::size_t num_labels = model.config().num_labels;
  std::vector<std::string> texts;
  std::vector<LabelSet> golds;
  for (const auto& ex : examples) {
    texts.push_back(ex.text);
    golds.push_back(ex.labels);
  }
  const auto preds = decide(predict_probabilities(model, vocab, texts, max_len), decision, threshold);
  auto report = make_report(per_class_prf(golds, preds, num_labels), std::move(label_names), std::move(split));
  report.config = {{"threshold", threshold},
                   {"decision", decision_name(decision)},
                   {"num_examples", examples.size()}};
  return report;
}

}  // namespace defemo
