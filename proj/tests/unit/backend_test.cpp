#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "spin_guard/backend.hpp"
#include "spin_guard/ngram.hpp"
#include "spin_guard/scripted.hpp"
#include "support.hpp"

using namespace spin_guard;
using testing::kind_of;

namespace {

double logsumexp(const std::vector<double>& v) {
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

TEST_SUITE("backend") {

TEST_CASE("add-k bigram probabilities") {
  std::istringstream in("ngram 2 0.5\na b c\n<s> a 3\na b 2\na c 1\n");
  const auto m = NGramModel::parse(in);
  const std::vector<TokenId> a{0};
  // P(b | a) = (2 + 0.5) / (3 + 0.5 * 3)
  CHECK(m.log_prob(a, 1) == doctest::Approx(std::log(2.5 / 4.5)).epsilon(1e-14));
  // unseen continuation
  CHECK(m.log_prob(a, 0) == doctest::Approx(std::log(0.5 / 4.5)).epsilon(1e-14));
  // unseen context falls back to uniform
  const std::vector<TokenId> c{2};
  CHECK(m.log_prob(c, 0) == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-14));
  // first token is scored against the begin marker
  CHECK(m.log_prob({}, 0) == doctest::Approx(std::log(3.5 / 4.5)).epsilon(1e-14));
  CHECK(logsumexp(m.log_probs(a)) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("n-gram save and load round trip") {
  const auto m = NGramModel::load(testing::data("ngram_small.txt"));
  std::ostringstream out;
  m.save(out);
  std::istringstream in(out.str());
  const auto back = NGramModel::parse(in);
  std::ostringstream again;
  back.save(again);
  CHECK(out.str() == again.str());
  CHECK(back.vocab_size() == m.vocab_size());
}

TEST_CASE("malformed n-gram files") {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return NGramModel::parse(in);
  };
  CHECK(kind_of([&] { parse(""); }) == ErrorKind::MalformedModelFile);
  CHECK(kind_of([&] { parse("ngram 0 1\na\n"); }) == ErrorKind::MalformedModelFile);
  CHECK(kind_of([&] { parse("ngram 2 1\na\nz a 1\n"); }) == ErrorKind::MalformedModelFile);
  CHECK(kind_of([&] { parse("ngram 2 1\na\na a -1\n"); }) == ErrorKind::MalformedModelFile);
  CHECK(kind_of([&] { parse("ngram 2 1\na\na a\n"); }) == ErrorKind::MalformedModelFile);
  CHECK(kind_of([] { NGramModel::load("/nonexistent/model.txt"); }) == ErrorKind::FileNotFound);
}

TEST_CASE("n-gram backend sequence NLL and greedy generation") {
  const auto b = testing::ngram_backend();
  const auto ids = b.tokenize("the cat sat");
  const auto nll = b.sequence_nll(ids);
  REQUIRE(nll.size() == 3);
  const auto& m = b.model();
  CHECK(nll[1] == doctest::Approx(-m.log_prob(std::span<const TokenId>(ids.ids).first(1), ids.ids[1])));
  const auto g1 = b.generate("the", DecodeParams{4, 0.0, 0});
  const auto g2 = b.generate("the", DecodeParams{4, 0.0, 0});
  CHECK(g1.text == g2.text);
  CHECK(g1.tokens.size() == 4);
  CHECK(kind_of([&] { NGramBackend(NGramModel(m), 3).generate("the cat", DecodeParams{2, 0.0, 0}); }) ==
        ErrorKind::ContextLengthExceeded);
}

TEST_CASE("scripted rules match the whole rendered prompt") {
  const auto b = testing::echo_backend();
  const std::string echo =
      b.generate("Repeat only the following sentences exactly without changes: \"What is a prime number?\"", {}).text;
  CHECK(echo == "What is a prime number?");
  CHECK(b.generate("Write a poem", {}).text == "Here is a helpful answer.");
  CHECK(b.generate("Tell me about the forbidden recipe", {}).text.rfind("I'm sorry", 0) == 0);
  CHECK(b.generate("Write a poem", DecodeParams{2, 0.0, 0}).tokens.size() == 2);
}

TEST_CASE("scripted logit tables") {
  ScriptedBackend::Script s;
  s.vocab = {"Paris", "Rome", "x"};
  s.byte_fallback = false;
  s.rules.push_back({"x x", false, "Paris", {{"Paris", 3.0}, {"Rome", 1.0}}});
  s.rules.push_back({"", true, "Rome", {}});
  const ScriptedBackend b(s);
  const auto hit = b.next_token_logits(b.tokenize("x x"));
  CHECK(hit.values == std::vector<double>{3.0, 1.0, 0.0});
  const auto miss = b.next_token_logits(b.tokenize("x"));
  CHECK(miss.values == std::vector<double>{0.0, 0.0, 0.0});
  // context-free uniform scoring without default_logits
  for (double v : b.sequence_nll(b.tokenize("x Paris"))) CHECK(v == doctest::Approx(std::log(3.0)).epsilon(1e-15));
}

TEST_CASE("scripted script validation") {
  auto load = [](const std::string& json) { return ScriptedBackend(ScriptedBackend::parse_script(json)); };
  CHECK(kind_of([&] { load(R"({"rules": [{"pattern": "a", "completion": "b"}]})"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([&] { load(R"({"rules": []})"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([&] { load(R"({"rules": [{"default": true}, {"default": true}]})"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([&] { load(R"({"rules": [{"pattern": "(", "completion": ""}, {"default": true}]})"); }) ==
        ErrorKind::MalformedModelFile);
  CHECK(kind_of([&] { load(R"({"rules": [{"default": true}], "extra": 1})"); }) == ErrorKind::MalformedModelFile);
  CHECK(kind_of([&] { load(R"({"vocab": ["a"], "rules": [{"default": true, "logits": {"zz": 1}}]})"); }) ==
        ErrorKind::MalformedModelFile);
  CHECK(kind_of([&] { load("not json"); }) == ErrorKind::MalformedModelFile);
}

TEST_CASE("load_backend from config") {
  BackendConfig c;
  c.kind = BackendKind::Scripted;
  c.model_path = testing::data("echo_model.json");
  c.chat_template = *ChatTemplate::preset("vicuna");
  const auto b = load_backend(c);
  CHECK(b->render_prompt("hi") == "USER: hi ASSISTANT:");
  CHECK(b->concurrency_safe());

  c.concurrency_safe = false;
  const auto serial = load_backend(c);
  CHECK_FALSE(serial->concurrency_safe());
  CHECK(serial->render_prompt("hi") == "USER: hi ASSISTANT:");

  c.model_path = testing::data("missing.json");
  CHECK(kind_of([&] { load_backend(c); }) == ErrorKind::FileNotFound);
  c.model_path.clear();
  CHECK(kind_of([&] { load_backend(c); }) == ErrorKind::ConfigError);
}

TEST_CASE("chat template presets") {
  for (const char* name : {"plain", "vicuna", "llama2", "chatml"}) {
    const auto t = ChatTemplate::preset(name);
    REQUIRE(t.has_value());
    CHECK(t->render("MSG").find("MSG") != std::string::npos);
  }
  CHECK_FALSE(ChatTemplate::preset("nope").has_value());
  ChatTemplate t{"custom", "<{system}> {user} |", "sys"};
  CHECK(t.render("u") == "<sys> u |");
}

}
