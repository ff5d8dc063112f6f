#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "defemo/error.hpp"
#include "defemo/tokenizer.hpp"

using namespace defemo;

namespace {

Vocabulary vocab_of(std::vector<std::string> tokens) { return Vocabulary::from_tokens(std::move(tokens)); }

}  // namespace

TEST_CASE("normalize_tokens lowercases and splits punctuation") {
  CHECK(normalize_tokens("Good, good") == std::vector<std::string>{"good", ",", "good"});
  CHECK(normalize_tokens("  it's  ok!?") == std::vector<std::string>{"it", "'", "s", "ok", "!", "?"});
  CHECK(normalize_tokens("").empty());
  CHECK(normalize_tokens("caf\xc3\xa9") == std::vector<std::string>{"caf\xc3\xa9"});
}

TEST_CASE("build orders by frequency then lexicographically") {
  const std::vector<std::string> corpus = {"a b", "a"};
  const auto v = Vocabulary::build(corpus, 1, 100);
  CHECK(v.size() == 7);
  CHECK(v.id_of("a") == 5);
  CHECK(v.id_of("b") == 6);

  const auto v2 = Vocabulary::build(corpus, 2, 100);
  CHECK(v2.size() == 6);
  CHECK(v2.contains("a"));
  CHECK_FALSE(v2.contains("b"));

  const std::vector<std::string> ties = {"zeta alpha mid"};
  const auto v3 = Vocabulary::build(ties, 1, 100);
  CHECK(v3.id_of("alpha") < v3.id_of("mid"));
  CHECK(v3.id_of("mid") < v3.id_of("zeta"));

  const auto v4 = Vocabulary::build(ties, 1, 6);
  CHECK(v4.size() == 6);
  CHECK(v4.contains("alpha"));
}

TEST_CASE("build rejects empty corpora and bad limits") {
  CHECK_THROWS_AS(Vocabulary::build(std::vector<std::string>{}, 1, 100), DataError);
  CHECK_THROWS_AS(Vocabulary::build(std::vector<std::string>{"a"}, 0, 100), ConfigError);
  CHECK_THROWS_AS(Vocabulary::build(std::vector<std::string>{"a"}, 1, 5), ConfigError);
}

TEST_CASE("special ids are reserved") {
  const auto v = vocab_of({"x"});
  CHECK(v.token(kPadId) == "[PAD]");
  CHECK(v.token(kUnkId) == "[UNK]");
  CHECK(v.token(kClsId) == "[CLS]");
  CHECK(v.token(kSepId) == "[SEP]");
  CHECK(v.token(kMaskId) == "[MASK]");
  CHECK(v.id_of("unseen") == kUnkId);
}

TEST_CASE("vocabulary save and load round trip") {
  const auto path = std::filesystem::temp_directory_path() / "defemo_test_vocab.txt";
  const auto v = vocab_of({"hello", "world", ","});
  v.save(path);
  const auto w = Vocabulary::load(path);
  CHECK(w.size() == v.size());
  CHECK(w.fingerprint() == v.fingerprint());
  CHECK(w.id_of("world") == v.id_of("world"));
  std::filesystem::remove(path);
  CHECK(vocab_of({"a"}).fingerprint() != vocab_of({"b"}).fingerprint());
}

TEST_CASE("encode_single") {
  const auto v = vocab_of({"good", ","});
  SUBCASE("empty text") {
    const auto s = encode_single("", v, 8);
    CHECK(s.ids == std::vector<TokenId>{kClsId});
  }
  SUBCASE("punctuation is a token") {
    const auto s = encode_single("Good, good", v, 8);
    CHECK(s.ids == std::vector<TokenId>{kClsId, v.id_of("good"), v.id_of(","), v.id_of("good")});
    CHECK(std::count(s.segment_ids.begin(), s.segment_ids.end(), 0) == 4);
    CHECK(s.text_len == 3);
  }
  SUBCASE("oov maps to unk") {
    const auto s = encode_single("good bad", v, 8);
    CHECK(s.ids[2] == kUnkId);
  }
  SUBCASE("truncation from the right") {
    std::string text;
    for (int i = 0; i < 500; ++i) text += "good ";
    const auto s = encode_single(text, v, 128);
    CHECK(s.ids.size() == 128);
    CHECK(s.ids[0] == kClsId);
    CHECK(std::count(s.ids.begin(), s.ids.end(), kSepId) == 0);
  }
}

TEST_CASE("encode_pair layout") {
  const auto v = vocab_of({"for", "art", "?", "a", "strong", "feeling", "of", "displeasure", "or", "antagonism"});
  const auto s = encode_pair("For art?", "A strong feeling of displeasure or antagonism", v, 64);
  REQUIRE(s.text_len == 3);
  REQUIRE(s.def_len == 7);
  CHECK(s.ids.size() == 1 + 3 + 1 + 7);
  CHECK(s.ids[0] == kClsId);
  CHECK(s.ids[4] == kSepId);
  CHECK(std::count(s.ids.begin(), s.ids.end(), kSepId) == 1);
  CHECK(std::count(s.ids.begin(), s.ids.end(), kClsId) == 1);
  for (std::size_t i = 0; i < s.ids.size(); ++i) CHECK(s.segment_ids[i] == (i >= 5 ? 1 : 0));
  CHECK(v.token(s.ids.back()) == "antagonism");

  const auto t = encode_pair("For art?", "A strong feeling", v, 64, {.trailing_sep = true});
  CHECK(t.ids.back() == kSepId);
  CHECK(std::count(t.ids.begin(), t.ids.end(), kSepId) == 2);
}

TEST_CASE("encode_pair truncates text before the definition") {
  const auto v = vocab_of({"w", "d"});
  std::string text;
  for (int i = 0; i < 100; ++i) text += "w ";
  const auto s = encode_pair(text, "d d d", v, 10);
  CHECK(s.ids.size() == 10);
  CHECK(s.def_len == 3);
  CHECK(s.text_len == 5);
  CHECK(s.ids[6] == kSepId);

  const auto t = encode_pair("w w", "d d d d d d d d d d", v, 6);
  CHECK(t.ids.size() == 6);
  CHECK(t.text_len == 0);
  CHECK(t.ids[1] == kSepId);
  CHECK(t.def_len == 4);
}

TEST_CASE("encode_pair with fully unknown parts keeps the segment split") {
  const auto v = vocab_of({"x"});
  const auto s = encode_pair("", "zzz", v, 8);
  CHECK(s.ids == std::vector<TokenId>{kClsId, kSepId, kUnkId});
  CHECK(s.segment_ids == std::vector<std::int32_t>{0, 0, 1});
  CHECK_THROWS_AS(encode_pair("text", "", v, 8), DataError);
  CHECK_THROWS_AS(encode_pair("text", "x", v, 2), ConfigError);
}

TEST_CASE("decode inverts encode for in-vocabulary text") {
  const auto v = vocab_of({"i", "am", "so", "happy", "!"});
  const std::string text = "I am SO happy!";
  const auto s = encode_single(text, v, 32);
  auto tokens = decode(std::span<const TokenId>(s.ids).subspan(1), v);
  CHECK(tokens == normalize_tokens(text));
}
