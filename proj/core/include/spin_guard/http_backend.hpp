#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "spin_guard/backend.hpp"

namespace spin_guard {

/**
 * Client for a completion endpoint that reports per-token logprobs.
 *
 * Request body: {"model", "prompt", "max_tokens", "temperature", "logprobs",
 * "echo", "seed"}. The response follows the completions layout:
 * choices[0].text and choices[0].logprobs.{tokens, token_logprobs,
 * top_logprobs}.
 *
 * Token strings returned by the server are interned into local ids below
 * `vocab_size`. Logits outside the returned top-k are set to the configured
 * floor; approximate_logits() reports this.
 */
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(const BackendConfig& config);
  ~HttpBackend() override;

  std::size_t vocab_size() const override { return vocab_size_; }
  TokenSequence tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const TokenId> ids) const override;
  LogitVector next_token_logits(const TokenSequence& context) const override;
  Generation generate(std::string_view prompt, const DecodeParams& params) const override;
  std::vector<double> sequence_nll(const TokenSequence& ids) const override;
  bool concurrency_safe() const override { return true; }
  bool approximate_logits() const override { return true; }

  struct Endpoint;

 private:
  std::string post(const std::string& body) const;
  TokenId intern(const std::string& piece) const;

  std::unique_ptr<Endpoint> endpoint_;
  std::string model_name_;
  double timeout_seconds_;
  std::size_t vocab_size_;
  std::size_t top_logprobs_;
  double logprob_floor_;

  mutable std::mutex mutex_;
  mutable std::vector<std::string> pieces_;
  mutable std::unordered_map<std::string, TokenId> index_;
};

}  // namespace spin_guard
