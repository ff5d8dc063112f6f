#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace defemo {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr TokenId kMaskId = 4;
inline constexpr TokenId kNumSpecial = 5;

inline bool is_special(TokenId id) { return id >= 0 && id < kNumSpecial; }

// Lowercases ASCII letters and splits on whitespace; every ASCII punctuation
// character becomes a token of its own. Bytes >= 0x80 are kept inside words.
std::vector<std::string> normalize_tokens(std::string_view text);

// Word-level vocabulary. Ids 0..4 are PAD, UNK, CLS, SEP, MASK.
class Vocabulary {
 public:
  // Tokens ordered by descending frequency, ties broken lexicographically.
  // `max_size` counts the five specials.
  static Vocabulary build(std::span<const std::string> corpus, std::size_t min_freq, std::size_t max_size);

  // One token per line, line i holds id i + 5.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  static Vocabulary from_tokens(std::vector<std::string> tokens);

  TokenId id_of(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return id_to_token_.size(); }

  // FNV-1a of the token list; used to detect vocabulary mismatches.
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

struct TokenSequence {
  std::vector<TokenId> ids;
  // 0 for [CLS] and text tokens, 1 from the first definition token on.
  std::vector<std::int32_t> segment_ids;
  std::size_t text_len = 0;
  std::size_t def_len = 0;
};

TokenSequence encode_single(std::string_view text, const Vocabulary& vocab, std::size_t max_len);

struct PairOptions {
  // Append [SEP] after the definition (BERT convention).
  bool trailing_sep = false;
};

// [CLS] text [SEP] definition. When the result exceeds `max_len`, text tokens
// are trimmed first and then the definition tail.
TokenSequence encode_pair(std::string_view text, std::string_view definition, const Vocabulary& vocab,
                          std::size_t max_len, PairOptions options = {});

std::vector<std::string> decode(std::span<const TokenId> ids, const Vocabulary& vocab);

}  // namespace defemo
