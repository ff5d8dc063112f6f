#include "defemo/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "defemo/error.hpp"

namespace defemo {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      parts.push_back(line.substr(start));
      return parts;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file", path.string());
  return in;
}

}  // namespace

int DefinitionTable::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::string_view relation_name(Relation r) {
  return r == Relation::IsDefinition ? "IsDefinition" : "IsNotDefinition";
}

// ---- primary data ------------------------------------------------------------

std::vector<PrimaryExample> parse_primary_tsv(std::istream& in, std::size_t num_labels, const std::string& source) {
  std::vector<PrimaryExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto parts = split_tabs(line);
    if (parts.size() != 3) {
      throw DataError("expected 3 tab-separated fields, found " + std::to_string(parts.size()), source, lineno);
    }
    PrimaryExample ex;
    ex.text = std::string(parts[0]);
    ex.id = std::string(parts[2]);
    const auto field = trim(parts[1]);
    if (field.empty()) throw DataError("empty label field", source, lineno);
    std::size_t start = 0;
    while (start <= field.size()) {
      auto end = field.find(',', start);
      if (end == std::string_view::npos) end = field.size();
      const auto tok = trim(field.substr(start, end - start));
      int value = -1;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
      if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || value < 0) {
        throw DataError("invalid label id '" + std::string(tok) + "'", source, lineno);
      }
      if (static_cast<std::size_t>(value) >= num_labels) {
        throw DataError("label id " + std::to_string(value) + " out of range for " +
                            std::to_string(num_labels) + " labels",
                        source, lineno);
      }
      ex.labels.push_back(value);
      start = end + 1;
    }
    std::sort(ex.labels.begin(), ex.labels.end());
    ex.labels.erase(std::unique(ex.labels.begin(), ex.labels.end()), ex.labels.end());
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<PrimaryExample> load_primary_tsv(const std::filesystem::path& path, std::size_t num_labels) {
  auto in = open_or_throw(path);
  return parse_primary_tsv(in, num_labels, path.string());
}

void write_primary_tsv(const std::filesystem::path& path, std::span<const PrimaryExample> examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file", path.string());
  for (const auto& ex : examples) {
    out << ex.text << '\t';
    for (std::size_t i = 0; i < ex.labels.size(); ++i) out << (i ? "," : "") << ex.labels[i];
    out << '\t' << ex.id << '\n';
  }
}

// ---- definitions ---------------------------------------------------------------

void write_definitions(const std::filesystem::path& path, const DefinitionTable& defs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file", path.string());
  for (std::size_t i = 0; i < defs.size(); ++i) out << defs.names[i] << '\t' << defs.definitions[i] << '\n';
}

DefinitionTable subset_definitions(const DefinitionTable& defs, std::span<const std::string> names) {
  DefinitionTable out;
  for (const auto& name : names) {
    const int i = defs.index_of(name);
    if (i < 0) throw DataError("unknown label '" + name + "'");
    out.names.push_back(defs.names[static_cast<std::size_t>(i)]);
    out.definitions.push_back(defs.definitions[static_cast<std::size_t>(i)]);
  }
  return out;
}

DefinitionTable parse_definitions(std::istream& in, const std::string& source, std::size_t expected_labels) {
  DefinitionTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto parts = split_tabs(line);
    if (parts.size() != 2) throw DataError("expected `name<TAB>definition`", source, lineno);
    const auto name = trim(parts[0]);
    const auto def = trim(parts[1]);
    if (name.empty()) throw DataError("empty label name", source, lineno);
    if (def.empty()) throw DataError("empty definition for '" + std::string(name) + "'", source, lineno);
    if (table.index_of(name) >= 0) throw DataError("duplicate label '" + std::string(name) + "'", source, lineno);
    table.names.emplace_back(name);
    table.definitions.emplace_back(def);
  }
  if (table.size() < 2) throw DataError("definition table needs at least 2 labels", source);
  if (expected_labels != 0 && table.size() != expected_labels) {
    throw DataError("expected " + std::to_string(expected_labels) + " labels, found " +
                        std::to_string(table.size()),
                    source);
  }
  return table;
}

DefinitionTable load_definitions(const std::filesystem::path& path, std::size_t expected_labels) {
  auto in = open_or_throw(path);
  return parse_definitions(in, path.string(), expected_labels);
}

const DefinitionTable& goemotions_definitions() {
  static const DefinitionTable table = [] {
    std::istringstream in(
        "admiration\tFinding something impressive or worthy of respect.\n"
        "amusement\tFinding something funny or being entertained.\n"
        "anger\tA strong feeling of displeasure or antagonism.\n"
        "annoyance\tMild anger, irritation.\n"
        "approval\tHaving or expressing a favorable opinion.\n"
        "caring\tDisplaying kindness and concern for others.\n"
        "confusion\tLack of understanding, uncertainty.\n"
        "curiosity\tA strong desire to know or learn something.\n"
        "desire\tA strong feeling of wanting something or wishing for something to happen.\n"
        "disappointment\tSadness or displeasure caused by the nonfulfillment of one's hopes or expectations.\n"
        "disapproval\tHaving or expressing an unfavorable opinion.\n"
        "disgust\tRevulsion or strong disapproval aroused by something unpleasant or offensive.\n"
        "embarrassment\tSelf-consciousness, shame, or awkwardness.\n"
        "excitement\tFeeling of great enthusiasm and eagerness.\n"
        "fear\tBeing afraid or worried.\n"
        "gratitude\tA feeling of thankfulness and appreciation.\n"
        "grief\tIntense sorrow, especially caused by someone's death.\n"
        "joy\tA feeling of pleasure and happiness.\n"
        "love\tA strong positive emotion of regard and affection.\n"
        "nervousness\tApprehension, worry, anxiety.\n"
        "optimism\tHopefulness and confidence about the future or the success of something.\n"
        "pride\tPleasure or satisfaction due to one's own achievements or the achievements of those with whom "
        "one is closely associated.\n"
        "realization\tBecoming aware of something.\n"
        "relief\tReassurance and relaxation following release from anxiety or distress.\n"
        "remorse\tRegret or guilty feeling.\n"
        "sadness\tEmotional pain, sorrow.\n"
        "surprise\tFeeling astonished, startled by something unexpected.\n"
        "neutral\tNo particular emotion is expressed.\n");
    return parse_definitions(in, "<builtin>", 28);
  }();
  return table;
}

// ---- auxiliary dataset -----------------------------------------------------------

std::vector<AuxExample> build_aux_dataset(std::span<const PrimaryExample> examples, const DefinitionTable& defs,
                                          Rng& rng, AuxOptions options) {
  const std::size_t num_labels = defs.size();
  if (num_labels < 2) throw DataError("build_aux_dataset: need at least 2 labels");
  if (options.negatives_per_label < 1) throw ConfigError("build_aux_dataset: negatives_per_label must be >= 1");

  std::vector<AuxExample> out;
  std::vector<int> complement;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    if (ex.labels.empty()) {
      throw DataError("build_aux_dataset: example '" + ex.id + "' has no gold labels");
    }
    complement.clear();
    for (int l = 0; l < static_cast<int>(num_labels); ++l) {
      if (!std::binary_search(ex.labels.begin(), ex.labels.end(), l)) complement.push_back(l);
    }
    if (complement.size() < options.negatives_per_label) {
      throw DataError("build_aux_dataset: example '" + ex.id + "' leaves too few non-gold labels for negatives");
    }
    for (int gold : ex.labels) {
      if (gold < 0 || static_cast<std::size_t>(gold) >= num_labels) {
        throw DataError("build_aux_dataset: label " + std::to_string(gold) + " out of range");
      }
      out.push_back({ex.text, gold, Relation::IsDefinition, i});
      // Partial Fisher-Yates: distinct negatives, uniform over the complement.
      for (std::size_t j = 0; j < options.negatives_per_label; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, complement.size() - 1);
        std::swap(complement[j], complement[pick(rng)]);
        out.push_back({ex.text, complement[j], Relation::IsNotDefinition, i});
      }
    }
  }
  return out;
}

void write_aux_tsv(const std::filesystem::path& path, std::span<const AuxExample> aux, const DefinitionTable& defs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file", path.string());
  for (const auto& a : aux) {
    out << a.text << '\t' << defs.names.at(static_cast<std::size_t>(a.def_label)) << '\t'
        << relation_name(a.relation) << '\n';
  }
}

// ---- masking -------------------------------------------------------------------------

MaskedSequence apply_mlm_masking(const TokenSequence& seq, std::size_t vocab_size, Rng& rng,
                                 const MaskingPolicy& policy) {
  std::vector<std::size_t> maskable;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (!is_special(seq.ids[i])) maskable.push_back(i);
  }
  if (maskable.empty()) throw DataError("apply_mlm_masking: sequence has no maskable tokens");
  if (vocab_size <= static_cast<std::size_t>(kNumSpecial)) {
    throw ConfigError("apply_mlm_masking: vocabulary has no regular tokens");
  }

  MaskedSequence out;
  out.input_ids = seq.ids;
  out.segment_ids = seq.segment_ids;

  std::bernoulli_distribution select(policy.select_prob);
  for (auto pos : maskable) {
    if (select(rng)) out.mask_positions.push_back(pos);
  }
  if (out.mask_positions.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, maskable.size() - 1);
    out.mask_positions.push_back(maskable[pick(rng)]);
  }

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<TokenId> random_token(kNumSpecial, static_cast<TokenId>(vocab_size - 1));
  for (auto pos : out.mask_positions) {
    out.target_ids.push_back(seq.ids[pos]);
    const double u = u01(rng);
    if (u < policy.mask_prob) {
      out.input_ids[pos] = kMaskId;
      out.actions.push_back(MaskAction::Mask);
    } else if (u < policy.mask_prob + policy.random_prob) {
      out.input_ids[pos] = random_token(rng);
      out.actions.push_back(MaskAction::Random);
    } else {
      out.actions.push_back(MaskAction::Keep);
    }
  }
  return out;
}

// ---- statistics ------------------------------------------------------------------------

double DatasetStats::cardinality_fraction(std::size_t k) const {
  if (num_examples == 0) return 0.0;
  auto it = cardinality.find(k);
  return it == cardinality.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(num_examples);
}

DatasetStats dataset_stats(std::span<const PrimaryExample> examples, std::size_t num_labels, std::string split) {
  DatasetStats s;
  s.split = std::move(split);
  s.num_examples = examples.size();
  s.label_counts.assign(num_labels, 0);
  for (const auto& ex : examples) {
    ++s.cardinality[ex.labels.size()];
    for (int l : ex.labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= num_labels) {
        throw DataError("dataset_stats: label " + std::to_string(l) + " out of range");
      }
      ++s.label_counts[static_cast<std::size_t>(l)];
    }
  }
  return s;
}

nlohmann::json stats_to_json(const DatasetStats& stats, const DefinitionTable* defs) {
  nlohmann::json j;
  j["split"] = stats.split;
  j["num_examples"] = stats.num_examples;
  auto& labels = j["label_counts"] = nlohmann::json::array();
  for (std::size_t i = 0; i < stats.label_counts.size(); ++i) {
    nlohmann::json row = {{"label", i}, {"count", stats.label_counts[i]}};
    if (defs && i < defs->size()) row["name"] = defs->names[i];
    labels.push_back(row);
  }
  auto& card = j["cardinality"] = nlohmann::json::array();
  for (const auto& [k, n] : stats.cardinality) {
    card.push_back({{"labels", k}, {"count", n}, {"fraction", stats.cardinality_fraction(k)}});
  }
  return j;
}

// ---- target data -----------------------------------------------------------------------

TargetDataset parse_target_tsv(std::istream& in, const std::string& source, std::span<const std::string> label_names) {
  std::vector<std::pair<std::string, std::string>> rows;
  std::vector<std::size_t> linenos;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto parts = split_tabs(line);
    if (parts.size() != 2) throw DataError("expected `text<TAB>label`", source, lineno);
    const auto label = trim(parts[1]);
    if (label.empty()) throw DataError("empty label", source, lineno);
    rows.emplace_back(std::string(parts[0]), std::string(label));
    linenos.push_back(lineno);
  }
  if (rows.empty()) throw DataError("no examples", source);

  TargetDataset ds;
  if (label_names.empty()) {
    std::set<std::string> names;
    for (const auto& r : rows) names.insert(r.second);
    ds.label_names.assign(names.begin(), names.end());
  } else {
    ds.label_names.assign(label_names.begin(), label_names.end());
  }
  if (ds.label_names.size() < 2) throw DataError("target dataset needs at least 2 labels", source);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto it = std::find(ds.label_names.begin(), ds.label_names.end(), rows[i].second);
    if (it == ds.label_names.end()) throw DataError("unknown label '" + rows[i].second + "'", source, linenos[i]);
    ds.examples.push_back({std::move(rows[i].first), static_cast<int>(it - ds.label_names.begin())});
  }
  return ds;
}

TargetDataset load_target_tsv(const std::filesystem::path& path, std::span<const std::string> label_names) {
  auto in = open_or_throw(path);
  return parse_target_tsv(in, path.string(), label_names);
}

void write_target_tsv(const std::filesystem::path& path, const TargetDataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file", path.string());
  for (const auto& ex : dataset.examples) {
    out << ex.text << '\t' << dataset.label_names.at(static_cast<std::size_t>(ex.label)) << '\n';
  }
}

}  // namespace defemo
