#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "defemo/data.hpp"

namespace defemo {

// Small stand-in corpora. Texts mix filler words with keywords drawn from
// the definition of each gold label, so definitions share tokens with the
// texts of their class.

// Label subsets used by the bundled corpora.
const std::vector<std::string>& protocol_label_names();  // 8 labels
const std::vector<std::string>& overfit_label_names();   // 6 labels

struct SyntheticOptions {
  std::size_t num_examples = 1200;
  double dev_fraction = 0.1;
  double test_fraction = 0.1;
  std::size_t min_filler = 3;
  std::size_t max_filler = 8;
  // Chance of one keyword from a non-gold label appearing in a text.
  double distractor_prob = 0.1;
  std::uint64_t seed = 13;
};

struct SyntheticSplits {
  std::vector<PrimaryExample> train;
  std::vector<PrimaryExample> dev;
  std::vector<PrimaryExample> test;
};

// Per-label cue words: definition tokens unique to that label plus the label
// name itself.
std::vector<std::vector<std::string>> definition_keywords(const DefinitionTable& defs);

// Multi-label corpus with roughly 83/15/2 percent of texts carrying 1/2/3
// labels and a skewed label frequency.
SyntheticSplits make_synthetic_corpus(const DefinitionTable& defs, const SyntheticOptions& options = {});

// `n` multi-label examples in which every label occurs at least once.
std::vector<PrimaryExample> make_overfit_set(const DefinitionTable& defs, std::size_t n = 32,
                                             std::uint64_t seed = 5);

// Single-label target corpus over seven emotions.
TargetDataset make_synthetic_target(std::size_t n = 700, std::uint64_t seed = 17);

}  // namespace defemo
