#include "spin_guard/backend.hpp"

#include <filesystem>

#include "spin_guard/error.hpp"
#include "spin_guard/http_backend.hpp"
#include "spin_guard/ngram.hpp"
#include "spin_guard/scripted.hpp"
#include "spin_guard/text.hpp"

namespace spin_guard {

std::string ChatTemplate::render(std::string_view user_message) const {
  std::string out = text::replace_first(format, "{system}", system_prompt);
  return text::replace_first(out, "{user}", user_message);
}

std::optional<ChatTemplate> ChatTemplate::preset(std::string_view name) {
  if (name == "plain") return ChatTemplate{"plain", "{user}", ""};
  if (name == "vicuna")
    return ChatTemplate{"vicuna", "{system}USER: {user} ASSISTANT:", ""};
  if (name == "llama2")
    return ChatTemplate{"llama2", "[INST] <<SYS>>\n{system}\n<</SYS>>\n\n{user} [/INST]", ""};
  if (name == "chatml")
    return ChatTemplate{"chatml",
                        "<|im_start|>system\n{system}<|im_end|>\n<|im_start|>user\n{user}<|im_end|>\n"
                        "<|im_start|>assistant\n",
                        ""};
  return std::nullopt;
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Scripted: return "scripted";
    case BackendKind::NGram: return "ngram";
    case BackendKind::Http: return "http";
  }
  return "unknown";
}

std::optional<BackendKind> parse_backend_kind(std::string_view s) {
  if (s == "scripted") return BackendKind::Scripted;
  if (s == "ngram") return BackendKind::NGram;
  if (s == "http") return BackendKind::Http;
  return std::nullopt;
}

void BackendConfig::validate() const {
  if (chat_template.format.find("{user}") == std::string::npos)
    fail(ErrorKind::ConfigError, "backend.chat_template: format has no {user} slot");
  if (context_length == 0) fail(ErrorKind::ConfigError, "backend.context_length must be positive");
  switch (kind) {
    case BackendKind::Http:
      if (endpoint.empty()) fail(ErrorKind::ConfigError, "backend.endpoint is required for kind http");
      if (model_name.empty()) fail(ErrorKind::ConfigError, "backend.model is required for kind http");
      if (!(timeout_seconds > 0.0)) fail(ErrorKind::ConfigError, "backend.timeout_s must be positive");
      if (vocab_size == 0) fail(ErrorKind::ConfigError, "backend.vocab_size must be positive");
      break;
    case BackendKind::Scripted:
    case BackendKind::NGram:
      if (model_path.empty())
        fail(ErrorKind::ConfigError, "backend.path is required for kind " + std::string(to_string(kind)));
      break;
  }
}

TokenSequence Backend::concat(const TokenSequence& a, const TokenSequence& b) const {
  std::vector<TokenId> ids;
  ids.reserve(a.size() + b.size());
  ids.insert(ids.end(), a.ids.begin(), a.ids.end());
  ids.insert(ids.end(), b.ids.begin(), b.ids.end());
  return from_ids(std::move(ids));
}

TokenSequence Backend::from_ids(std::vector<TokenId> ids) const {
  TokenSequence seq;
  seq.text = detokenize(ids);
  seq.ids = std::move(ids);
  return seq;
}

namespace {

// Declared concurrency can only be narrowed by the config.
class SerializedBackend final : public Backend {
 public:
  explicit SerializedBackend(std::unique_ptr<Backend> inner) : inner_(std::move(inner)) {
    chat_template_ = inner_->chat_template();
  }
  std::size_t vocab_size() const override { return inner_->vocab_size(); }
  TokenSequence tokenize(std::string_view t) const override { return inner_->tokenize(t); }
  std::string detokenize(std::span<const TokenId> ids) const override { return inner_->detokenize(ids); }
  LogitVector next_token_logits(const TokenSequence& c) const override { return inner_->next_token_logits(c); }
  Generation generate(std::string_view p, const DecodeParams& d) const override { return inner_->generate(p, d); }
  std::vector<double> sequence_nll(const TokenSequence& ids) const override { return inner_->sequence_nll(ids); }
  bool concurrency_safe() const override { return false; }
  bool approximate_logits() const override { return inner_->approximate_logits(); }

 private:
  std::unique_ptr<Backend> inner_;
};

void require_readable(const std::string& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    fail(ErrorKind::FileNotFound, "model file '" + path + "' not found");
}

}  // namespace

std::unique_ptr<Backend> load_backend(const BackendConfig& config) {
  config.validate();
  std::unique_ptr<Backend> backend;
  switch (config.kind) {
    case BackendKind::Scripted:
      require_readable(config.model_path);
      backend = std::make_unique<ScriptedBackend>(ScriptedBackend::load(config.model_path, config.context_length));
      break;
    case BackendKind::NGram:
      require_readable(config.model_path);
      backend = std::make_unique<NGramBackend>(NGramModel::load(config.model_path), config.context_length);
      break;
    case BackendKind::Http:
      backend = std::make_unique<HttpBackend>(config);
      break;
  }
  backend->set_chat_template(config.chat_template);
  if (config.concurrency_safe == false && backend->concurrency_safe())
    backend = std::make_unique<SerializedBackend>(std::move(backend));
  return backend;
}

}  // namespace spin_guard
