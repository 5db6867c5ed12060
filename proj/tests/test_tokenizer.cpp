#include "doctest.h"
#include "sadi/error.hpp"
#include "sadi/tokenizer.hpp"
#include "support.hpp"

using namespace sadi;

namespace {

Tokenizer with_bytes(std::unordered_map<std::string, TokenId> extra) {
  std::unordered_map<std::string, TokenId> v;
  for (int b = 0; b < 256; ++b) v.emplace(Tokenizer::byte_token(static_cast<unsigned char>(b)), b);
  for (auto& [k, id] : extra) v.emplace(k, id);
  return Tokenizer(std::move(v));
}

}  // namespace

TEST_SUITE("tokenizer") {
  TEST_CASE("greedy longest match") {
    const auto tok = with_bytes({{"a", 256}, {"ab", 257}, {"abc", 258}, {"bc", 259}});
    CHECK(tok.encode("abc") == std::vector<TokenId>{258});
    CHECK(tok.encode("abab") == std::vector<TokenId>{257, 257});
    CHECK(tok.encode("abbc") == std::vector<TokenId>{257, 259});
    CHECK(tok.encode("") == std::vector<TokenId>{});
  }

  TEST_CASE("unknown bytes fall back to byte tokens") {
    const auto tok = with_bytes({{"hi", 256}});
    CHECK(tok.encode("hi!") == std::vector<TokenId>{256, '!'});
    CHECK(Tokenizer::byte_token(0x0a) == "<0x0A>");
    const std::string text = "hi\xff\n";
    CHECK(tok.decode(tok.encode(text)) == text);
  }

  TEST_CASE("no fallback means TokenOutOfRange") {
    const auto tok = testing::letter_tokenizer(3);
    CHECK(tok.encode("abca") == std::vector<TokenId>{0, 1, 2, 0});
    try {
      tok.encode("abz");
      FAIL("expected TokenOutOfRange");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::TokenOutOfRange);
    }
  }

  TEST_CASE("json round trip") {
    const auto tok = with_bytes({{" yes", 300}, {" no", 301}});
    const auto back = Tokenizer::from_json(tok.to_json());
    CHECK(back.vocab() == tok.vocab());
    CHECK(back.id_bound() == 302);
    CHECK_THROWS_AS(Tokenizer::from_json(R"({"a": 1, "b": 1})"), Error);
    CHECK_THROWS_AS(Tokenizer::from_json("[1,2]"), Error);
  }
}
