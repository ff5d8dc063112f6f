#include "defemo/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "defemo/error.hpp"
#include "defemo/hash.hpp"

namespace defemo {

namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> specials = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  return specials;
}

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

bool valid_token(std::string_view t) {
  if (t.empty()) return false;
  for (unsigned char c : t) {
    if (is_ascii_space(c) || (c >= 'A' && c <= 'Z')) return false;
  }
  return true;
}

std::vector<TokenId> lookup(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id_of(t));
  return ids;
}

}  // namespace

std::vector<std::string> normalize_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (unsigned char c : text) {
    if (is_ascii_space(c)) {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    }
  }
  flush();
  return out;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  v.id_to_token_ = special_tokens();
  for (std::size_t i = 0; i < v.id_to_token_.size(); ++i) {
    v.token_to_id_.emplace(v.id_to_token_[i], static_cast<TokenId>(i));
  }
  for (auto& t : tokens) {
    if (!valid_token(t)) throw DataError("invalid vocabulary token '" + t + "'");
    const auto id = static_cast<TokenId>(v.id_to_token_.size());
    if (!v.token_to_id_.emplace(t, id).second) throw DataError("duplicate vocabulary token '" + t + "'");
    v.id_to_token_.push_back(std::move(t));
  }
  return v;
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus, std::size_t min_freq, std::size_t max_size) {
  if (corpus.empty()) throw DataError("build_vocab: empty corpus");
  if (min_freq < 1) throw ConfigError("build_vocab: min_freq must be >= 1");
  if (max_size <= static_cast<std::size_t>(kNumSpecial)) throw ConfigError("build_vocab: max_size must exceed 5");

  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus) {
    for (auto& t : normalize_tokens(text)) ++counts[std::move(t)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= min_freq && !std::count(special_tokens().begin(), special_tokens().end(), tok)) {
      ranked.emplace_back(tok, n);
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - kNumSpecial);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(std::move(ranked[i].first));
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file", path.string());
  std::vector<std::string> tokens;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!valid_token(line)) throw DataError("invalid token '" + line + "'", path.string(), lineno);
    tokens.push_back(line);
  }
  try {
    return from_tokens(std::move(tokens));
  } catch (const DataError& e) {
    throw DataError(e.what(), path.string());
  }
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file", path.string());
  for (std::size_t i = kNumSpecial; i < id_to_token_.size(); ++i) out << id_to_token_[i] << '\n';
}

TokenId Vocabulary::id_of(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw DataError("token id " + std::to_string(id) + " out of vocabulary range");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) != 0;
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& t : id_to_token_) {
    h = fnv1a64(t, h);
    h = fnv1a64(std::string_view("\n", 1), h);
  }
  return h;
}

TokenSequence encode_single(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 2) throw ConfigError("encode_single: max_len must be >= 2");
  auto ids = lookup(normalize_tokens(text), vocab);
  if (ids.size() > max_len - 1) ids.resize(max_len - 1);
  TokenSequence seq;
  seq.ids.reserve(ids.size() + 1);
  seq.ids.push_back(kClsId);
  seq.ids.insert(seq.ids.end(), ids.begin(), ids.end());
  seq.segment_ids.assign(seq.ids.size(), 0);
  seq.text_len = ids.size();
  return seq;
}

TokenSequence encode_pair(std::string_view text, std::string_view definition, const Vocabulary& vocab,
                          std::size_t max_len, PairOptions options) {
  const std::size_t specials = options.trailing_sep ? 3 : 2;
  if (max_len < specials + 1) {
    throw ConfigError("encode_pair: max_len must be >= " + std::to_string(specials + 1));
  }
  auto def_ids = lookup(normalize_tokens(definition), vocab);
  if (def_ids.empty()) throw DataError("encode_pair: definition is empty");
  auto text_ids = lookup(normalize_tokens(text), vocab);

  const std::size_t budget = max_len - specials;
  if (text_ids.size() + def_ids.size() > budget) {
    if (def_ids.size() >= budget) {
      text_ids.clear();
      def_ids.resize(budget);
    } else {
      text_ids.resize(budget - def_ids.size());
    }
  }

  TokenSequence seq;
  seq.ids.reserve(specials + text_ids.size() + def_ids.size());
  seq.ids.push_back(kClsId);
  seq.ids.insert(seq.ids.end(), text_ids.begin(), text_ids.end());
  seq.ids.push_back(kSepId);
  seq.ids.insert(seq.ids.end(), def_ids.begin(), def_ids.end());
  if (options.trailing_sep) seq.ids.push_back(kSepId);
  seq.segment_ids.assign(seq.ids.size(), 1);
  std::fill_n(seq.segment_ids.begin(), text_ids.size() + 2, 0);
  seq.text_len = text_ids.size();
  seq.def_len = def_ids.size();
  return seq;
}

std::vector<std::string> decode(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(vocab.token(id));
  return out;
}

}  // namespace defemo
