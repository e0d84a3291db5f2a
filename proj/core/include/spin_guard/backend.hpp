#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spin_guard/tokens.hpp"

namespace spin_guard {

struct DecodeParams {
  std::size_t max_new_tokens = 64;
  double temperature = 0.0;  // 0 = greedy
  std::uint64_t seed = 0;
};

struct Generation {
  std::string text;
  TokenSequence tokens;
};

/**
 * Chat template with `{system}` and `{user}` slots. The rendered string is
 * what a completion model sees; the assistant turn begins right after it.
 */
struct ChatTemplate {
  std::string name = "plain";
  std::string format = "{user}";
  std::string system_prompt;

  std::string render(std::string_view user_message) const;

  /// Built-in presets: plain, vicuna, llama2, chatml.
  static std::optional<ChatTemplate> preset(std::string_view name);
};

enum class BackendKind { Scripted, NGram, Http };

std::string_view to_string(BackendKind kind);
std::optional<BackendKind> parse_backend_kind(std::string_view s);

struct BackendConfig {
  BackendKind kind = BackendKind::Scripted;
  std::string model_path;
  std::string endpoint;
  std::string model_name;
  double timeout_seconds = 30.0;
  ChatTemplate chat_template;
  std::size_t context_length = 4096;
  // http only: ids handed out to remote tokens, logits below top-k get the floor
  std::size_t vocab_size = 32000;
  std::size_t top_logprobs = 20;
  double logprob_floor = -30.0;
  // Overrides the backend's own declaration when set.
  std::optional<bool> concurrency_safe;

  /// Throws Error{ConfigError} when the kind-specific fields are missing.
  void validate() const;
};

/**
 * Uniform model contract. Implementations are immutable after construction;
 * identical inputs give identical outputs for the scripted and n-gram kinds.
 */
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual TokenSequence tokenize(std::string_view text) const = 0;
  virtual std::string detokenize(std::span<const TokenId> ids) const = 0;

  /// Scores for the token following `context`.
  virtual LogitVector next_token_logits(const TokenSequence& context) const = 0;

  /// Renders `prompt` as the user turn and decodes the assistant reply.
  virtual Generation generate(std::string_view prompt, const DecodeParams& params) const = 0;

  /// Entry i is -ln P(ids[i] | ids[<i]).
  virtual std::vector<double> sequence_nll(const TokenSequence& ids) const = 0;

  virtual bool concurrency_safe() const { return true; }
  /// True when logits are reconstructed from top-k logprobs with a floor.
  virtual bool approximate_logits() const { return false; }

  std::string render_prompt(std::string_view user_message) const {
    return chat_template_.render(user_message);
  }
  const ChatTemplate& chat_template() const noexcept { return chat_template_; }
  void set_chat_template(ChatTemplate t) { chat_template_ = std::move(t); }

  TokenSequence concat(const TokenSequence& a, const TokenSequence& b) const;
  TokenSequence from_ids(std::vector<TokenId> ids) const;

 protected:
  ChatTemplate chat_template_;
};

/// The http kind connects lazily: an unreachable endpoint fails on first use.
std::unique_ptr<Backend> load_backend(const BackendConfig& config);

}  // namespace spin_guard
