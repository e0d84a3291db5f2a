#pragma once

#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "spin_guard/backend.hpp"
#include "spin_guard/tokenizer.hpp"

namespace spin_guard {

/// One scripted behavior. `pattern` must match the whole rendered prompt
/// (ECMAScript syntax); the completion may reference captures as $1, $2.
struct ScriptRule {
  std::string pattern;  // empty for the default rule
  bool is_default = false;
  std::string completion;
  std::map<std::string, double> logit_table;
};

/**
 * Deterministic instruction-follower. Rules are tried in order and the first
 * match wins; the last rule must be the default (catch-all).
 *
 * Rule logit tables apply to next_token_logits() of a full prompt.
 * sequence_nll() scores each token under the static `default_logits`
 * (uniform when absent), independent of context.
 *
 * File format (JSON):
 *   { "vocab": [...], "byte_fallback": true, "default_logits": {tok: v},
 *     "rules": [ {"pattern": "...", "completion": "...", "logits": {...}},
 *                ..., {"default": true, "completion": "..."} ] }
 */
class ScriptedBackend final : public Backend {
 public:
  struct Script {
    std::vector<std::string> vocab;
    bool byte_fallback = true;
    std::map<std::string, double> default_logits;
    std::vector<ScriptRule> rules;
  };

  explicit ScriptedBackend(Script script, std::size_t context_length = 4096);

  static Script parse_script(const std::string& json_text);
  static ScriptedBackend load(const std::string& path, std::size_t context_length = 4096);

  const WordTokenizer& tokenizer() const noexcept { return tokenizer_; }
  /// Index of the rule that answers `rendered_prompt`.
  std::size_t match_rule(const std::string& rendered_prompt) const;

  std::size_t vocab_size() const override { return tokenizer_.size(); }
  TokenSequence tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const TokenId> ids) const override;
  LogitVector next_token_logits(const TokenSequence& context) const override;
  Generation generate(std::string_view prompt, const DecodeParams& params) const override;
  std::vector<double> sequence_nll(const TokenSequence& ids) const override;

 private:
  struct CompiledRule {
    ScriptRule rule;
    std::optional<std::regex> regex;
    std::optional<LogitVector> logits;
  };
  LogitVector table_to_logits(const std::map<std::string, double>& table) const;

  WordTokenizer tokenizer_;
  std::vector<CompiledRule> rules_;
  LogitVector default_logits_;
  std::vector<double> default_log_probs_;
  std::size_t context_length_;
};

}  // namespace spin_guard
