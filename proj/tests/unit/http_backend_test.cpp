#include <doctest.h>

#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "spin_guard/detection.hpp"
#include "spin_guard/http_backend.hpp"
#include "support.hpp"

using namespace spin_guard;
using testing::kind_of;
using nlohmann::json;

namespace {

// Character-level completion server. Every character is one token; prompt
// logprobs alternate -1, -2 after an unscored first token; the next-token
// distribution always lists "P" and "x".
class MockServer {
 public:
  MockServer() {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      {
        std::lock_guard lock(mutex_);
        last_ = body;
      }
      const std::string prompt = body.at("prompt");
      if (prompt.find("BOOM") != std::string::npos) {
        res.status = 500;
        res.set_content("internal error", "text/plain");
        return;
      }
      if (prompt.find("TOOLONG") != std::string::npos) {
        res.status = 400;
        res.set_content(R"({"error": "This model's maximum context length is 16 tokens"})", "application/json");
        return;
      }
      if (prompt.find("SLOW") != std::string::npos) std::this_thread::sleep_for(std::chrono::milliseconds(1500));
      if (prompt.find("GARBAGE") != std::string::npos) {
        res.set_content("<html>", "text/html");
        return;
      }

      json choice;
      const int max_tokens = body.at("max_tokens");
      if (body.value("echo", false) && max_tokens == 0) {
        json tokens = json::array(), lps = json::array();
        for (std::size_t i = 0; i < prompt.size(); ++i) {
          tokens.push_back(std::string(1, prompt[i]));
          lps.push_back(i == 0 ? json(nullptr) : json(-1.0 - static_cast<double>(i % 2)));
        }
        choice = {{"text", prompt}, {"logprobs", {{"tokens", tokens}, {"token_logprobs", lps}}}};
      } else if (max_tokens == 1 && body.value("logprobs", 0) > 0) {
        choice = {{"text", "P"},
                  {"logprobs",
                   {{"tokens", {"P"}}, {"token_logprobs", {-0.5}}, {"top_logprobs", {{{"P", -0.5}, {"x", -1.5}}}}}}};
      } else {
        std::string text = "ok";
        if (prompt.find("France") != std::string::npos) text = "Paris";
        const auto q = prompt.find('"');
        if (prompt.rfind("Repeat", 0) == 0 && q != std::string::npos) text = prompt.substr(q + 1, prompt.size() - q - 2);
        json tokens = json::array();
        for (char c : text) tokens.push_back(std::string(1, c));
        choice = {{"text", text}, {"logprobs", {{"tokens", tokens}}}};
      }
      res.set_content(json{{"choices", {choice}}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  BackendConfig config(std::size_t vocab = 64) const {
    BackendConfig c;
    c.kind = BackendKind::Http;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port_) + "/v1/completions";
    c.model_name = "toy";
    c.timeout_seconds = 0.5;
    c.vocab_size = vocab;
    return c;
  }
  json last() const {
    std::lock_guard lock(mutex_);
    return last_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mutex_;
  json last_;
};

}  // namespace

TEST_SUITE("http") {

TEST_CASE("tokens are interned into local ids") {
  MockServer server;
  HttpBackend b(server.config());
  const auto ids = b.tokenize("abca");
  REQUIRE(ids.size() == 4);
  CHECK(ids.ids[0] == ids.ids[3]);
  CHECK(ids.ids[0] != ids.ids[1]);
  CHECK(b.detokenize(ids.ids) == "abca");
  CHECK(server.last().at("echo") == true);
  CHECK(server.last().at("max_tokens") == 0);
}

TEST_CASE("prompt logprobs become NLLs with a floor for the unscored first token") {
  MockServer server;
  HttpBackend b(server.config());
  const auto nll = b.sequence_nll(b.tokenize("abc"));
  CHECK(nll == std::vector<double>{30.0, 2.0, 1.0});
}

TEST_CASE("next-token logits fill missing entries with the floor") {
  MockServer server;
  HttpBackend b(server.config());
  const auto p = b.tokenize("P").ids.front();
  const auto logits = b.next_token_logits(b.tokenize("Q"));
  REQUIRE(logits.size() == 64);
  CHECK(logits.values[p] == -0.5);
  std::size_t floors = 0;
  for (double v : logits.values) floors += v == -30.0;
  CHECK(floors == 62);
  CHECK(server.last().at("logprobs") == 20);
  CHECK(b.approximate_logits());
}

TEST_CASE("interjection loss over the remote backend") {
  MockServer server;
  HttpBackend b(server.config());
  const double loss = interjection_loss("hello", b);
  const double z = std::log(std::exp(-0.5) + std::exp(-1.5) + 62 * std::exp(-30.0));
  CHECK(loss == doctest::Approx(z + 0.5).epsilon(1e-12));

  const auto report = detect("hello", b);
  CHECK(report.find(DetectionLayer::Interject)->approximate);
  CHECK(report.find(DetectionLayer::Repeat)->loss == 0.0);
}

TEST_CASE("generation sends the documented wire fields") {
  MockServer server;
  HttpBackend b(server.config());
  CHECK(b.generate("capital of France", DecodeParams{8, 0.0, 42}).text == "Paris");
  const auto body = server.last();
  for (const char* key : {"model", "prompt", "max_tokens", "temperature", "logprobs", "echo", "seed"})
    CHECK(body.contains(key));
  CHECK(body.at("seed") == 42);
  CHECK(body.at("max_tokens") == 8);
}

TEST_CASE("endpoint failures map to error kinds") {
  MockServer server;
  HttpBackend b(server.config());
  CHECK(kind_of([&] { b.generate("BOOM", {}); }) == ErrorKind::BackendUnavailable);
  CHECK(kind_of([&] { b.generate("TOOLONG", {}); }) == ErrorKind::ContextLengthExceeded);
  CHECK(kind_of([&] { b.generate("SLOW", {}); }) == ErrorKind::BackendUnavailable);
  CHECK(kind_of([&] { b.generate("GARBAGE", {}); }) == ErrorKind::ProtocolError);

  HttpBackend tiny(server.config(3));
  CHECK(kind_of([&] { tiny.tokenize("abcd"); }) == ErrorKind::ProtocolError);

  auto c = server.config();
  c.endpoint = "https://127.0.0.1:1/v1/completions";
  CHECK(kind_of([&] { HttpBackend x(c); }) == ErrorKind::ConfigError);
  c.endpoint = "127.0.0.1/v1";
  CHECK(kind_of([&] { HttpBackend x(c); }) == ErrorKind::ConfigError);
}

TEST_CASE("connection is lazy and an unreachable endpoint fails per call") {
  BackendConfig c;
  c.kind = BackendKind::Http;
  c.endpoint = "http://127.0.0.1:9/v1/completions";
  c.model_name = "toy";
  c.timeout_seconds = 0.5;
  HttpBackend b(c);
  CHECK(kind_of([&] { b.generate("hi", {}); }) == ErrorKind::BackendUnavailable);
}

}
