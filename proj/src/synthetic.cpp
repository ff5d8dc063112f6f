#include "defemo/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "defemo/error.hpp"
#include "defemo/tokenizer.hpp"

namespace defemo {

namespace {

const std::set<std::string, std::less<>>& stopwords() {
  static const std::set<std::string, std::less<>> words = {
      "a",     "an",    "and",   "or",     "of",    "the",  "to",   "for",  "by",     "with",  "about",
      "being", "having", "something", "strong", "feeling", "one", "s",    "is",   "no",     "own",   "those",
      "whom",  "due",   "caused", "following", "especially", "someone", "from", "or", "great", "mild"};
  return words;
}

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "this",  "that",  "the",   "post",   "game",  "really", "just",  "i",     "you",   "we",    "it",
      "was",   "is",    "so",    "my",     "day",   "made",   "team",  "thread", "comment", "guy", "people",
      "today", "again", "still", "think",  "know",  "see",    "what",  "when",  "he",    "she",   "they",
      "one",   "time",  "about", "after",  "movie", "song",   "work",  "home",  "city",  "week",  "right",
      "here",  "there", "but",   "and",    "with",  "reddit", "video", "man",   "story", "year",  "night"};
  return words;
}

// Extra everyday cues for a few labels.
const std::map<std::string, std::vector<std::string>, std::less<>>& extra_cues() {
  static const std::map<std::string, std::vector<std::string>, std::less<>> cues = {
      {"gratitude", {"thanks", "thank"}},
      {"amusement", {"lol", "haha"}},
      {"love", {"adore"}},
      {"curiosity", {"wonder"}},
      {"surprise", {"wow"}},
      {"anger", {"furious"}},
      {"fear", {"scared"}},
  };
  return cues;
}

std::vector<std::string> content_tokens(const std::string& text) {
  std::vector<std::string> out;
  for (auto& t : normalize_tokens(text)) {
    const bool word = std::all_of(t.begin(), t.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)); });
    if (word && !stopwords().count(t)) out.push_back(t);
  }
  return out;
}

std::size_t sample_cardinality(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  return x < 0.83 ? 1 : (x < 0.98 ? 2 : 3);
}

std::string compose(std::vector<std::string> words, Rng& rng) {
  std::shuffle(words.begin(), words.end(), rng);
  std::string text;
  for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
  static const char* endings[] = {"", ".", "!", " ?"};
  std::uniform_int_distribution<int> end(0, 3);
  return text + endings[end(rng)];
}

template <typename T>
const T& pick(const std::vector<T>& xs, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, xs.size() - 1);
  return xs[d(rng)];
}

std::string make_text(const LabelSet& labels, const std::vector<std::vector<std::string>>& keywords,
                      std::size_t min_filler, std::size_t max_filler, double distractor_prob, Rng& rng) {
  std::vector<std::string> words;
  std::uniform_int_distribution<std::size_t> fill(min_filler, max_filler);
  const std::size_t n_fill = fill(rng);
  for (std::size_t i = 0; i < n_fill; ++i) words.push_back(pick(filler_words(), rng));
  std::uniform_int_distribution<int> per_label(1, 2);
  for (int l : labels) {
    const int k = per_label(rng);
    for (int i = 0; i < k; ++i) words.push_back(pick(keywords[static_cast<std::size_t>(l)], rng));
  }
  std::bernoulli_distribution distract(distractor_prob);
  if (distract(rng)) {
    std::uniform_int_distribution<std::size_t> other(0, keywords.size() - 1);
    const auto l = other(rng);
    if (!std::binary_search(labels.begin(), labels.end(), static_cast<int>(l))) {
      words.push_back(pick(keywords[l], rng));
    }
  }
  return compose(std::move(words), rng);
}

}  // namespace

const std::vector<std::string>& protocol_label_names() {
  static const std::vector<std::string> names = {"anger", "fear",    "gratitude", "joy",
                                                 "sadness", "surprise", "love",     "curiosity"};
  return names;
}

const std::vector<std::string>& overfit_label_names() {
  static const std::vector<std::string> names = {"anger", "fear", "gratitude", "joy", "sadness", "surprise"};
  return names;
}

std::vector<std::vector<std::string>> definition_keywords(const DefinitionTable& defs) {
  std::map<std::string, std::size_t> doc_freq;
  std::vector<std::vector<std::string>> tokens(defs.size());
  for (std::size_t c = 0; c < defs.size(); ++c) {
    tokens[c] = content_tokens(defs.definitions[c]);
    std::set<std::string> unique(tokens[c].begin(), tokens[c].end());
    for (const auto& t : unique) ++doc_freq[t];
  }
  std::vector<std::vector<std::string>> out(defs.size());
  for (std::size_t c = 0; c < defs.size(); ++c) {
    std::set<std::string> seen;
    for (const auto& t : tokens[c]) {
      if (doc_freq[t] == 1 && seen.insert(t).second) out[c].push_back(t);
    }
    for (const auto& t : content_tokens(defs.names[c])) {
      if (seen.insert(t).second) out[c].push_back(t);
    }
    if (auto it = extra_cues().find(defs.names[c]); it != extra_cues().end()) {
      for (const auto& t : it->second) {
        if (seen.insert(t).second) out[c].push_back(t);
      }
    }
    if (out[c].empty()) throw DataError("synthetic: label '" + defs.names[c] + "' has no usable keyword");
  }
  return out;
}

SyntheticSplits make_synthetic_corpus(const DefinitionTable& defs, const SyntheticOptions& options) {
  if (defs.size() < 3) throw ConfigError("synthetic: need at least 3 labels");
  if (options.num_examples < 10) throw ConfigError("synthetic: need at least 10 examples");
  if (options.min_filler > options.max_filler) throw ConfigError("synthetic: min_filler > max_filler");
  Rng rng(options.seed);
  const auto keywords = definition_keywords(defs);
  const std::size_t L = defs.size();

  // Skewed label prior: a seeded ranking with weight 1/(rank+1)^0.8.
  std::vector<std::size_t> rank(L);
  for (std::size_t i = 0; i < L; ++i) rank[i] = i;
  std::shuffle(rank.begin(), rank.end(), rng);
  std::vector<double> weights(L);
  for (std::size_t i = 0; i < L; ++i) weights[rank[i]] = 1.0 / std::pow(static_cast<double>(i + 1), 0.8);
  std::discrete_distribution<int> label_dist(weights.begin(), weights.end());

  std::vector<PrimaryExample> all;
  for (std::size_t i = 0; i < options.num_examples; ++i) {
    const std::size_t k = sample_cardinality(rng);
    LabelSet labels;
    while (labels.size() < k) {
      const int l = label_dist(rng);
      if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
    }
    std::sort(labels.begin(), labels.end());
    PrimaryExample ex;
    ex.id = "syn" + std::to_string(i);
    ex.text = make_text(labels, keywords, options.min_filler, options.max_filler, options.distractor_prob, rng);
    ex.labels = std::move(labels);
    all.push_back(std::move(ex));
  }
  const auto n_dev = static_cast<std::size_t>(std::llround(options.dev_fraction * options.num_examples));
  const auto n_test = static_cast<std::size_t>(std::llround(options.test_fraction * options.num_examples));
  if (n_dev + n_test >= all.size()) throw ConfigError("synthetic: dev and test fractions leave no train data");
  SyntheticSplits s;
  const auto train_end = all.size() - n_dev - n_test;
  s.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(train_end));
  s.dev.assign(all.begin() + static_cast<std::ptrdiff_t>(train_end),
               all.begin() + static_cast<std::ptrdiff_t>(train_end + n_dev));
  s.test.assign(all.begin() + static_cast<std::ptrdiff_t>(train_end + n_dev), all.end());
  return s;
}

std::vector<PrimaryExample> make_overfit_set(const DefinitionTable& defs, std::size_t n, std::uint64_t seed) {
  const std::size_t L = defs.size();
  if (n < L) throw ConfigError("overfit set: " + std::to_string(n) + " examples cannot cover " + std::to_string(L) +
                               " labels");
  Rng rng(seed);
  const auto keywords = definition_keywords(defs);
  std::uniform_int_distribution<int> any(0, static_cast<int>(L) - 1);
  std::vector<PrimaryExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    LabelSet labels;
    labels.push_back(i < L ? static_cast<int>(i) : any(rng));
    const std::size_t k = sample_cardinality(rng);
    while (labels.size() < k) {
      const int l = any(rng);
      if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
    }
    std::sort(labels.begin(), labels.end());
    PrimaryExample ex;
    ex.id = "fit" + std::to_string(i);
    ex.text = make_text(labels, keywords, 2, 5, 0.0, rng);
    ex.labels = std::move(labels);
    out.push_back(std::move(ex));
  }
  return out;
}

TargetDataset make_synthetic_target(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> cues = {
      {"anger", {"anger", "antagonism", "displeasure", "furious", "irritation"}},
      {"disgust", {"disgust", "revulsion", "unpleasant", "offensive"}},
      {"fear", {"fear", "afraid", "worried", "scared"}},
      {"guilt", {"guilt", "guilty", "regret", "remorse"}},
      {"joy", {"joy", "pleasure", "happiness", "enthusiasm"}},
      {"sadness", {"sadness", "sorrow", "pain", "grief"}},
      {"shame", {"shame", "awkwardness", "embarrassment", "self"}},
  };
  if (n < cues.size()) throw ConfigError("synthetic target: too few examples");
  Rng rng(seed);
  TargetDataset d;
  std::vector<std::vector<std::string>> keywords;
  for (const auto& [name, words] : cues) {
    d.label_names.push_back(name);
    keywords.push_back(words);
  }
  std::uniform_int_distribution<int> any(0, static_cast<int>(cues.size()) - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i < cues.size() ? static_cast<int>(i) : any(rng);
    d.examples.push_back({make_text({label}, keywords, 3, 9, 0.2, rng), label});
  }
  return d;
}

}  // namespace defemo
