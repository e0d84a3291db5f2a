#include <doctest.h>

#include <cmath>
#include <random>

#include "csv.hpp"
#include "spin_guard/error.hpp"
#include "spin_guard/text.hpp"
#include "spin_guard/tokenizer.hpp"
#include "spin_guard/tokens.hpp"

using namespace spin_guard;

TEST_SUITE("text") {

TEST_CASE("single spaces between known words are implicit") {
  WordTokenizer tok({"!", "the", "cat"}, false);
  CHECK(tok.encode("! ! ! ! !").size() == 5);
  CHECK(tok.encode("the cat") == std::vector<TokenId>{1, 2});
  CHECK(tok.decode(std::vector<TokenId>{1, 2, 0}) == "the cat !");
}

TEST_CASE("unknown words need byte fallback") {
  WordTokenizer strict({"the"}, false);
  CHECK_THROWS_AS(strict.encode("the dog"), Error);
  try {
    strict.encode("the dog");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedCharacter);
  }

  WordTokenizer tok({"the"}, true);
  const auto ids = tok.encode("the dog");
  // "the", explicit space byte, then d o g
  CHECK(ids.size() == 5);
  CHECK(tok.is_byte(ids[1]));
  CHECK(tok.decode(ids) == "the dog");
  CHECK(tok.size() == 1 + WordTokenizer::kByteTokens);
  CHECK(tok.name(ids[1]) == "<0x20>");
  CHECK(tok.find("<0x20>") == ids[1]);
}

TEST_CASE("byte fallback round-trips arbitrary text") {
  WordTokenizer tok({"a", "b", "ab", "!"}, true);
  std::mt19937 rng(3);
  const std::string alphabet = "ab! \t\n\xC3\xA9";
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const int n = static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    CHECK(tok.decode(tok.encode(s)) == s);
  }
}

TEST_CASE("duplicate or empty vocabulary entries are rejected") {
  CHECK_THROWS_AS(WordTokenizer({"a", "a"}, false), Error);
  CHECK_THROWS_AS(WordTokenizer({"a", ""}, false), Error);
  CHECK_THROWS_AS(WordTokenizer({"a b"}, false), Error);
}

TEST_CASE("log_softmax and token_nll") {
  const std::vector<double> logits{1.0, 2.0, 3.0};
  const auto lp = log_softmax(logits);
  const double z = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  CHECK(lp[2] == doctest::Approx(3.0 - z).epsilon(1e-15));
  CHECK(token_nll(LogitVector{logits}, 0) == doctest::Approx(z - 1.0).epsilon(1e-15));
  // large logits stay finite
  const auto big = log_softmax(std::vector<double>{1000.0, 1000.0});
  CHECK(big[0] == doctest::Approx(-std::log(2.0)));
  CHECK(top_k(LogitVector{{0.5, 2.0, 2.0, -1.0}}, 2) == std::vector<TokenId>{1, 2});
  CHECK(argmax(LogitVector{{0.5, 2.0, 2.0}}) == 1);
}

TEST_CASE("text helpers") {
  CHECK(text::trim("  x y \n") == "x y");
  CHECK(text::to_code_points("h\xC3\xA9").size() == 2);
  CHECK(text::starts_with_icase("I'M SORRY, no", "i'm sorry"));
  CHECK(text::contains_icase("the capital is PARIS.", "paris"));
  CHECK(text::count_occurrences("{request} and {request}", "{request}") == 2);
  CHECK(text::replace_first("X {request} Y", "{request}", "z") == "X z Y");
  CHECK_THROWS_AS(text::read_file("/nonexistent/spin_guard"), Error);
}

TEST_CASE("csv parsing follows RFC 4180 quoting") {
  const auto rows = csv::parse("id,text\r\n1,\"a, \"\"quoted\"\" b\"\n2,\"multi\nline\"\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].fields[1] == "a, \"quoted\" b");
  CHECK(rows[2].fields[1] == "multi\nline");
  CHECK(rows[2].line == 3);
  CHECK(csv::parse("\xEF\xBB\xBFid\n1\n")[0].fields[0] == "id");
  CHECK_THROWS_AS(csv::parse("id,text\n1,\"open\n"), Error);
  CHECK_THROWS_AS(csv::parse("id,text\n1,a\"b\n"), Error);
}

TEST_CASE("errors carry a kind and an optional stage") {
  const Error e(ErrorKind::BackendUnavailable, "down");
  const auto tagged = e.with_stage("repeat");
  CHECK(tagged.kind() == ErrorKind::BackendUnavailable);
  CHECK(tagged.stage() == "repeat");
  CHECK(std::string(tagged.what()).find("[repeat]") != std::string::npos);
  CHECK(is_backend_error(ErrorKind::ContextLengthExceeded));
  CHECK_FALSE(is_backend_error(ErrorKind::ConfigError));
}

}
