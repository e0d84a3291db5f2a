#include "spin_guard/scripted.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "spin_guard/error.hpp"
#include "spin_guard/text.hpp"

namespace spin_guard {
namespace {

using nlohmann::json;

[[noreturn]] void malformed(const std::string& what) { fail(ErrorKind::MalformedModelFile, what); }

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key)) malformed(where + ": unknown key '" + key + "'");
}

std::map<std::string, double> parse_table(const json& j, const std::string& where) {
  if (!j.is_object()) malformed(where + " must be an object of token -> number");
  std::map<std::string, double> out;
  for (const auto& [tok, val] : j.items()) {
    if (!val.is_number()) malformed(where + "." + tok + " must be a number");
    out[tok] = val.get<double>();
  }
  return out;
}

}  // namespace

ScriptedBackend::Script ScriptedBackend::parse_script(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    malformed(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) malformed("script must be a JSON object");
  reject_unknown_keys(root, {"vocab", "byte_fallback", "default_logits", "rules"}, "script");

  Script script;
  if (root.contains("vocab")) {
    if (!root["vocab"].is_array()) malformed("vocab must be an array of strings");
    for (const auto& w : root["vocab"]) {
      if (!w.is_string()) malformed("vocab entries must be strings");
      script.vocab.push_back(w.get<std::string>());
    }
  }
  if (root.contains("byte_fallback")) {
    if (!root["byte_fallback"].is_boolean()) malformed("byte_fallback must be a boolean");
    script.byte_fallback = root["byte_fallback"].get<bool>();
  }
  if (root.contains("default_logits")) script.default_logits = parse_table(root["default_logits"], "default_logits");
  if (!root.contains("rules") || !root["rules"].is_array()) malformed("rules must be an array");
  std::size_t i = 0;
  for (const auto& r : root["rules"]) {
    const std::string where = "rules[" + std::to_string(i++) + "]";
    if (!r.is_object()) malformed(where + " must be an object");
    reject_unknown_keys(r, {"pattern", "default", "completion", "logits"}, where);
    ScriptRule rule;
    if (r.contains("default")) {
      if (!r["default"].is_boolean()) malformed(where + ".default must be a boolean");
      rule.is_default = r["default"].get<bool>();
    }
    if (r.contains("pattern")) {
      if (!r["pattern"].is_string()) malformed(where + ".pattern must be a string");
      rule.pattern = r["pattern"].get<std::string>();
    }
    if (rule.is_default == r.contains("pattern"))
      malformed(where + ": a rule has either a pattern or \"default\": true");
    if (r.contains("completion")) {
      if (!r["completion"].is_string()) malformed(where + ".completion must be a string");
      rule.completion = r["completion"].get<std::string>();
    }
    if (r.contains("logits")) rule.logit_table = parse_table(r["logits"], where + ".logits");
    script.rules.push_back(std::move(rule));
  }
  return script;
}

ScriptedBackend ScriptedBackend::load(const std::string& path, std::size_t context_length) {
  return ScriptedBackend(parse_script(text::read_file(path)), context_length);
}

ScriptedBackend::ScriptedBackend(Script script, std::size_t context_length)
    : context_length_(context_length) {
  try {
    tokenizer_ = WordTokenizer(std::move(script.vocab), script.byte_fallback);
  } catch (const Error& e) {
    malformed(e.detail());
  }
  if (script.rules.empty()) fail(ErrorKind::ConfigError, "scripted backend needs at least one rule");
  if (!script.rules.back().is_default)
    fail(ErrorKind::ConfigError, "the last scripted rule must be the default (catch-all) rule");
  default_logits_ = table_to_logits(script.default_logits);
  default_log_probs_ = log_softmax(default_logits_.values);

  for (std::size_t i = 0; i < script.rules.size(); ++i) {
    auto& rule = script.rules[i];
    if (rule.is_default && i + 1 != script.rules.size())
      fail(ErrorKind::ConfigError, "only the last scripted rule may be the default rule");
    CompiledRule compiled;
    if (!rule.is_default) {
      try {
        compiled.regex.emplace(rule.pattern, std::regex::ECMAScript | std::regex::optimize);
      } catch (const std::regex_error& e) {
        malformed("rule " + std::to_string(i) + ": bad pattern: " + e.what());
      }
    }
    if (!rule.logit_table.empty()) compiled.logits = table_to_logits(rule.logit_table);
    compiled.rule = std::move(rule);
    rules_.push_back(std::move(compiled));
  }
}

LogitVector ScriptedBackend::table_to_logits(const std::map<std::string, double>& table) const {
  LogitVector out{std::vector<double>(tokenizer_.size(), 0.0)};
  for (const auto& [tok, value] : table) {
    const auto id = tokenizer_.find(tok);
    if (!id) malformed("logit table names unknown token '" + tok + "'");
    if (!std::isfinite(value)) malformed("logit for '" + tok + "' is not finite");
    out.values[*id] = value;
  }
  return out;
}

std::size_t ScriptedBackend::match_rule(const std::string& rendered) const {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (!rules_[i].regex || std::regex_match(rendered, *rules_[i].regex)) return i;
  }
  return rules_.size() - 1;
}

TokenSequence ScriptedBackend::tokenize(std::string_view text) const {
  return TokenSequence{tokenizer_.encode(text), std::string(text)};
}

std::string ScriptedBackend::detokenize(std::span<const TokenId> ids) const { return tokenizer_.decode(ids); }

LogitVector ScriptedBackend::next_token_logits(const TokenSequence& context) const {
  const std::string text = context.text.empty() ? detokenize(context.ids) : context.text;
  const auto& rule = rules_[match_rule(text)];
  return rule.logits ? *rule.logits : default_logits_;
}

Generation ScriptedBackend::generate(std::string_view prompt, const DecodeParams& params) const {
  const std::string rendered = render_prompt(prompt);
  const std::size_t prompt_tokens = tokenizer_.encode(rendered).size();
  if (prompt_tokens + params.max_new_tokens > context_length_)
    fail(ErrorKind::ContextLengthExceeded, std::to_string(prompt_tokens) + " prompt tokens + " +
                                               std::to_string(params.max_new_tokens) + " new tokens exceed " +
                                               std::to_string(context_length_));

  std::string completion;
  for (const auto& rule : rules_) {
    if (!rule.regex) {
      completion = rule.rule.completion;
      break;
    }
    std::smatch m;
    if (std::regex_match(rendered, m, *rule.regex)) {
      completion = m.format(rule.rule.completion);
      break;
    }
  }

  Generation g;
  auto ids = tokenizer_.encode(completion);
  if (ids.size() > params.max_new_tokens) {
    ids.resize(params.max_new_tokens);
    g.tokens = from_ids(std::move(ids));
  } else {
    g.tokens = TokenSequence{std::move(ids), completion};
  }
  g.text = g.tokens.text;
  return g;
}

std::vector<double> ScriptedBackend::sequence_nll(const TokenSequence& ids) const {
  if (ids.empty()) fail(ErrorKind::InvalidArgument, "sequence_nll needs at least one token");
  std::vector<double> out;
  out.reserve(ids.size());
  for (TokenId id : ids.ids) {
    if (id >= default_log_probs_.size()) fail(ErrorKind::InvalidArgument, "token id outside vocabulary");
    out.push_back(-default_log_probs_[id]);
  }
  return out;
}

}  // namespace spin_guard
