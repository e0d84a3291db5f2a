#include "spin_guard/http_backend.hpp"

#include <cmath>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "spin_guard/error.hpp"
#include "spin_guard/text.hpp"

namespace spin_guard {

using nlohmann::json;

struct HttpBackend::Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

namespace {

HttpBackend::Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) fail(ErrorKind::ConfigError, "backend.endpoint must be an absolute URL: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    fail(ErrorKind::ConfigError, "backend.endpoint scheme must be http or https: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

const json& first_choice(const json& body) {
  if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty())
    fail(ErrorKind::ProtocolError, "response has no choices");
  return body["choices"][0];
}

const json& logprobs_of(const json& choice) {
  if (!choice.contains("logprobs") || !choice["logprobs"].is_object())
    fail(ErrorKind::ProtocolError, "response has no logprobs");
  return choice["logprobs"];
}

std::vector<std::string> tokens_of(const json& logprobs) {
  if (!logprobs.contains("tokens") || !logprobs["tokens"].is_array())
    fail(ErrorKind::ProtocolError, "logprobs.tokens missing");
  std::vector<std::string> out;
  for (const auto& t : logprobs["tokens"]) {
    if (!t.is_string()) fail(ErrorKind::ProtocolError, "logprobs.tokens entries must be strings");
    out.push_back(t.get<std::string>());
  }
  return out;
}

}  // namespace

HttpBackend::HttpBackend(const BackendConfig& config)
    : endpoint_(std::make_unique<Endpoint>(split_url(config.endpoint))),
      model_name_(config.model_name),
      timeout_seconds_(config.timeout_seconds),
      vocab_size_(config.vocab_size),
      top_logprobs_(config.top_logprobs),
      logprob_floor_(config.logprob_floor) {
  if (endpoint_->origin.rfind("https", 0) == 0)
    fail(ErrorKind::ConfigError, "https endpoints are not supported by this build");
  chat_template_ = config.chat_template;
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::post(const std::string& body) const {
  httplib::Client client(endpoint_->origin);
  const auto sec = static_cast<time_t>(timeout_seconds_);
  const auto usec = static_cast<time_t>((timeout_seconds_ - static_cast<double>(sec)) * 1e6);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
  auto res = client.Post(endpoint_->path, body, "application/json");
  if (!res)
    fail(ErrorKind::BackendUnavailable,
         endpoint_->origin + endpoint_->path + ": " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    const bool too_long = res->status == 413 || text::contains_icase(res->body, "context length");
    fail(too_long ? ErrorKind::ContextLengthExceeded : ErrorKind::BackendUnavailable,
         "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  return res->body;
}

TokenId HttpBackend::intern(const std::string& piece) const {
  std::lock_guard lock(mutex_);
  if (auto it = index_.find(piece); it != index_.end()) return it->second;
  if (pieces_.size() >= vocab_size_)
    fail(ErrorKind::ProtocolError, "remote vocabulary exceeds configured vocab_size " + std::to_string(vocab_size_));
  const auto id = static_cast<TokenId>(pieces_.size());
  pieces_.push_back(piece);
  index_.emplace(piece, id);
  return id;
}

namespace {

json parse_body(const std::string& raw) {
  try {
    return json::parse(raw);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ProtocolError, std::string("response is not JSON: ") + e.what());
  }
}

}  // namespace

TokenSequence HttpBackend::tokenize(std::string_view text) const {
  TokenSequence seq;
  seq.text = std::string(text);
  if (text.empty()) return seq;
  json req = {{"model", model_name_}, {"prompt", text}, {"max_tokens", 0},
              {"temperature", 0.0}, {"logprobs", 0}, {"echo", true}};
  const auto body = parse_body(post(req.dump()));
  for (const auto& piece : tokens_of(logprobs_of(first_choice(body)))) seq.ids.push_back(intern(piece));
  return seq;
}

std::string HttpBackend::detokenize(std::span<const TokenId> ids) const {
  std::lock_guard lock(mutex_);
  std::string out;
  for (TokenId id : ids) {
    if (id >= pieces_.size()) fail(ErrorKind::InvalidArgument, "token id " + std::to_string(id) + " was never issued");
    out += pieces_[id];
  }
  return out;
}

LogitVector HttpBackend::next_token_logits(const TokenSequence& context) const {
  const std::string prompt = context.text.empty() ? detokenize(context.ids) : context.text;
  json req = {{"model", model_name_}, {"prompt", prompt}, {"max_tokens", 1},
              {"temperature", 0.0}, {"logprobs", top_logprobs_}, {"echo", false}};
  const auto body = parse_body(post(req.dump()));
  const auto& lp = logprobs_of(first_choice(body));
  if (!lp.contains("top_logprobs") || !lp["top_logprobs"].is_array() || lp["top_logprobs"].empty() ||
      !lp["top_logprobs"][0].is_object())
    fail(ErrorKind::ProtocolError, "logprobs.top_logprobs missing");
  LogitVector out{std::vector<double>(vocab_size_, logprob_floor_)};
  for (const auto& [piece, value] : lp["top_logprobs"][0].items()) {
    if (!value.is_number() || !std::isfinite(value.get<double>()))
      fail(ErrorKind::ProtocolError, "non-finite logprob for '" + piece + "'");
    out.values[intern(piece)] = value.get<double>();
  }
  return out;
}

Generation HttpBackend::generate(std::string_view prompt, const DecodeParams& params) const {
  json req = {{"model", model_name_},
              {"prompt", render_prompt(prompt)},
              {"max_tokens", params.max_new_tokens},
              {"temperature", params.temperature},
              {"seed", params.seed},
              {"logprobs", 0},
              {"echo", false}};
  const auto body = parse_body(post(req.dump()));
  const auto& choice = first_choice(body);
  if (!choice.contains("text") || !choice["text"].is_string()) fail(ErrorKind::ProtocolError, "choices[0].text missing");
  Generation g;
  g.text = choice["text"].get<std::string>();
  if (choice.contains("logprobs") && choice["logprobs"].is_object() && choice["logprobs"].contains("tokens")) {
    for (const auto& piece : tokens_of(choice["logprobs"])) g.tokens.ids.push_back(intern(piece));
    g.tokens.text = g.text;
  } else {
    g.tokens = tokenize(g.text);
  }
  if (g.tokens.size() > params.max_new_tokens) {
    g.tokens.ids.resize(params.max_new_tokens);
    g.tokens.text = detokenize(g.tokens.ids);
    g.text = g.tokens.text;
  }
  return g;
}

std::vector<double> HttpBackend::sequence_nll(const TokenSequence& ids) const {
  if (ids.empty()) fail(ErrorKind::InvalidArgument, "sequence_nll needs at least one token");
  json req = {{"model", model_name_}, {"prompt", detokenize(ids.ids)}, {"max_tokens", 0},
              {"temperature", 0.0}, {"logprobs", 0}, {"echo", true}};
  const auto body = parse_body(post(req.dump()));
  const auto& lp = logprobs_of(first_choice(body));
  if (!lp.contains("token_logprobs") || !lp["token_logprobs"].is_array())
    fail(ErrorKind::ProtocolError, "endpoint did not echo prompt logprobs");
  const auto& values = lp["token_logprobs"];
  if (values.size() != ids.size())
    fail(ErrorKind::ProtocolError, "echoed " + std::to_string(values.size()) + " tokens for a " +
                                       std::to_string(ids.size()) + "-token sequence");
  std::vector<double> out;
  out.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].is_null() && i == 0) {
      // the first prompt token has no left context on most servers
      out.push_back(-logprob_floor_);
      continue;
    }
    if (!values[i].is_number() || !std::isfinite(values[i].get<double>()))
      fail(ErrorKind::ProtocolError, "token_logprobs[" + std::to_string(i) + "] is not a finite number");
    out.push_back(-values[i].get<double>());
  }
  return out;
}

}  // namespace spin_guard
