#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "defemo/tokenizer.hpp"

namespace defemo {

using Rng = std::mt19937_64;

// Sorted, duplicate-free label ids.
using LabelSet = std::vector<int>;

struct PrimaryExample {
  std::string id;
  std::string text;
  LabelSet labels;
};

// Label names and definitions; the row index is the label id.
struct DefinitionTable {
  std::vector<std::string> names;
  std::vector<std::string> definitions;

  std::size_t size() const { return names.size(); }
  // -1 when absent.
  int index_of(std::string_view name) const;
};

enum class Relation { IsDefinition, IsNotDefinition };

std::string_view relation_name(Relation r);

struct AuxExample {
  std::string text;
  int def_label = 0;
  Relation relation = Relation::IsDefinition;
  // Index of the primary example this instance was derived from.
  std::size_t source = 0;
};

enum class MaskAction { Mask, Random, Keep };

struct MaskedSequence {
  std::vector<TokenId> input_ids;
  std::vector<std::size_t> mask_positions;
  std::vector<TokenId> target_ids;
  std::vector<MaskAction> actions;
  std::vector<std::int32_t> segment_ids;
};

struct MaskingPolicy {
  double select_prob = 0.15;
  double mask_prob = 0.80;
  double random_prob = 0.10;
};

// `text<TAB>comma-separated label ids<TAB>id`, one example per line.
std::vector<PrimaryExample> parse_primary_tsv(std::istream& in, std::size_t num_labels,
                                              const std::string& source = "<stream>");
std::vector<PrimaryExample> load_primary_tsv(const std::filesystem::path& path, std::size_t num_labels);
void write_primary_tsv(const std::filesystem::path& path, std::span<const PrimaryExample> examples);

// `label_name<TAB>definition`; line order assigns ids. A nonzero
// `expected_labels` rejects files with a different row count.
DefinitionTable parse_definitions(std::istream& in, const std::string& source = "<stream>",
                                  std::size_t expected_labels = 0);
DefinitionTable load_definitions(const std::filesystem::path& path, std::size_t expected_labels = 0);
void write_definitions(const std::filesystem::path& path, const DefinitionTable& defs);

// Rows of `defs` for `names`, in the order given.
DefinitionTable subset_definitions(const DefinitionTable& defs, std::span<const std::string> names);

// The 28 GoEmotions labels with their annotation-guideline definitions.
const DefinitionTable& goemotions_definitions();

struct AuxOptions {
  std::size_t negatives_per_label = 1;
};

// For every (example, gold label) pair: one IsDefinition instance followed by
// `negatives_per_label` IsNotDefinition instances whose label is drawn
// uniformly from the labels outside the gold set.
std::vector<AuxExample> build_aux_dataset(std::span<const PrimaryExample> examples,
                                          const DefinitionTable& defs, Rng& rng, AuxOptions options = {});

// `text<TAB>def_label_name<TAB>IsDefinition|IsNotDefinition`.
void write_aux_tsv(const std::filesystem::path& path, std::span<const AuxExample> aux,
                   const DefinitionTable& defs);

// BERT-style masking over non-special tokens. At least one token is always
// selected.
MaskedSequence apply_mlm_masking(const TokenSequence& seq, std::size_t vocab_size, Rng& rng,
                                 const MaskingPolicy& policy = {});

struct DatasetStats {
  std::string split;
  std::size_t num_examples = 0;
  std::vector<std::size_t> label_counts;
  // cardinality -> number of examples with that many labels.
  std::map<std::size_t, std::size_t> cardinality;

  double cardinality_fraction(std::size_t k) const;
  double single_label_fraction() const { return cardinality_fraction(1); }
};

DatasetStats dataset_stats(std::span<const PrimaryExample> examples, std::size_t num_labels,
                           std::string split = "train");
nlohmann::json stats_to_json(const DatasetStats& stats, const DefinitionTable* defs = nullptr);

// Single-label target data for transfer experiments.
struct TargetExample {
  std::string text;
  int label = 0;
};

struct TargetDataset {
  std::vector<std::string> label_names;
  std::vector<TargetExample> examples;
};

// `text<TAB>label name`. The label space is `label_names` when given,
// otherwise the sorted set of names found in the file.
TargetDataset load_target_tsv(const std::filesystem::path& path,
                              std::span<const std::string> label_names = {});
TargetDataset parse_target_tsv(std::istream& in, const std::string& source,
                               std::span<const std::string> label_names = {});
void write_target_tsv(const std::filesystem::path& path, const TargetDataset& dataset);

}  // namespace defemo
