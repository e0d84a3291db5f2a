#include "spin_guard/config.hpp"

#include <cmath>
#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "spin_guard/text.hpp"

namespace spin_guard {
namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  fail(ErrorKind::ConfigError, path + ": " + what);
}

// Reads one JSON object, tracking which keys were consumed so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* get(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  void read(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) config_error(key_path(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void read(const std::string& key, double& out) {
    if (const json* v = get(key)) {
      if (!v->is_number()) config_error(key_path(key), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) config_error(key_path(key), "must be finite");
    }
  }

  void read(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) config_error(key_path(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  template <typename U>
    requires std::is_unsigned_v<U>
  void read(const std::string& key, U& out) {
    if (const json* v = get(key)) {
      if (v->is_number_unsigned()) {
        out = v->get<U>();
      } else if (v->is_number_integer()) {
        config_error(key_path(key), "must not be negative");
      } else {
        config_error(key_path(key), "expected a non-negative integer");
      }
    }
  }

  void read(const std::string& key, std::vector<std::string>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) config_error(key_path(key), "expected an array of strings");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_string()) config_error(key_path(key), "expected an array of strings");
        out.push_back(e.get<std::string>());
      }
    }
  }

  template <typename E, typename Parse>
  void read_enum(const std::string& key, E& out, Parse parse) {
    if (const json* v = get(key)) {
      if (!v->is_string()) config_error(key_path(key), "expected a string");
      const auto parsed = parse(v->get<std::string>());
      if (!parsed) config_error(key_path(key), "unknown value '" + v->get<std::string>() + "'");
      out = *parsed;
    }
  }

  void check_unknown() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) config_error(key_path(k), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

void read_chat_template(Section& s, ChatTemplate& out) {
  const json* v = s.get("chat_template");
  if (!v) return;
  const std::string path = s.key_path("chat_template");
  if (v->is_string()) {
    const auto preset = ChatTemplate::preset(v->get<std::string>());
    if (!preset) config_error(path, "unknown preset '" + v->get<std::string>() + "'");
    out = *preset;
    return;
  }
  Section t(*v, path);
  std::string preset_name;
  t.read("preset", preset_name);
  if (!preset_name.empty()) {
    const auto preset = ChatTemplate::preset(preset_name);
    if (!preset) config_error(t.key_path("preset"), "unknown preset '" + preset_name + "'");
    out = *preset;
  } else {
    out.name = "custom";
  }
  t.read("name", out.name);
  t.read("format", out.format);
  t.read("system_prompt", out.system_prompt);
  t.check_unknown();
}

void read_backend(const json& j, const std::string& base_dir, BackendConfig& b) {
  Section s(j, "backend");
  if (!s.get("kind")) config_error("backend.kind", "required");
  s.read_enum("kind", b.kind, parse_backend_kind);
  s.read("path", b.model_path);
  b.model_path = resolve(base_dir, b.model_path);
  s.read("endpoint", b.endpoint);
  s.read("model", b.model_name);
  s.read("timeout_s", b.timeout_seconds);
  read_chat_template(s, b.chat_template);
  s.read("context_length", b.context_length);
  s.read("vocab_size", b.vocab_size);
  s.read("top_logprobs", b.top_logprobs);
  s.read("logprob_floor", b.logprob_floor);
  if (const json* v = s.get("concurrency_safe")) {
    if (!v->is_boolean()) config_error("backend.concurrency_safe", "expected true or false");
    b.concurrency_safe = v->get<bool>();
  }
  s.check_unknown();
}

void read_detection(const json& j, DetectionConfig& d) {
  Section s(j, "detection");
  s.read("repeat_instruction", d.repeat_instruction);
  s.read("repeat_threshold", d.repeat_threshold);
  s.read("probe_question", d.probe_question);
  s.read("probe_answer", d.probe_answer);
  s.read("interject_threshold", d.interject_threshold);
  s.read_enum("interject_mode", d.interject_mode, parse_interject_mode);
  s.read("generation_window", d.generation_window);
  s.read("short_circuit", d.short_circuit);
  s.read("repeat_max_new_tokens", d.repeat_max_new_tokens);
  s.check_unknown();
  if (!(d.repeat_threshold >= 0.0 && d.repeat_threshold <= 2.0))
    config_error("detection.repeat_threshold", "must lie in [0, 2]");
  if (!(d.interject_threshold >= 0.0)) config_error("detection.interject_threshold", "must be >= 0");
}

void read_refusals(Section& s, const std::string& base_dir, std::vector<std::string>& out) {
  const bool inline_list = s.get("refusal_prefixes") != nullptr;
  const bool file = s.get("refusal_prefixes_file") != nullptr;
  if (inline_list && file)
    config_error(s.key_path("refusal_prefixes"), "give either refusal_prefixes or refusal_prefixes_file");
  s.read("refusal_prefixes", out);
  std::string path;
  s.read("refusal_prefixes_file", path);
  if (!path.empty()) out = load_refusal_prefixes(resolve(base_dir, path));
  if (out.empty()) config_error(s.key_path("refusal_prefixes"), "must not be empty");
}

void read_reversal(const json& j, const std::string& base_dir, ReversalConfig& r) {
  Section s(j, "reversal");
  s.read("init_prefix", r.init_prefix);
  s.read("steps", r.steps);
  s.read("candidate_k", r.candidate_k);
  s.read("batch_size", r.batch_size);
  s.read("checkpoint_every", r.checkpoint_every);
  read_refusals(s, base_dir, r.refusal_prefixes);
  s.read_enum("proposer", r.proposer, parse_proposer);
  s.read("seed", r.seed);
  s.read("max_new_tokens", r.max_new_tokens);
  s.check_unknown();
}

void read_attack(const json& j, const std::string& base_dir, PipelineConfig& c) {
  Section s(j, "attack");
  AttackConfig& a = c.attack;
  s.read("target", a.target);
  s.read("max_iters", a.max_iters);
  s.read("suffix_init", a.suffix_init);
  s.read("candidate_k", a.candidate_k);
  s.read("batch_size", a.batch_size);
  s.read("seed", a.seed);
  s.read_enum("proposer", a.proposer, parse_proposer);
  read_refusals(s, base_dir, a.refusal_prefixes);
  s.read("early_stop", a.early_stop);
  s.read("max_new_tokens", a.max_new_tokens);
  if (const json* v = s.get("lambdas")) {
    Section l(*v, "attack.lambdas");
    l.read("repeat", c.lambdas.repeat);
    l.read("interject", c.lambdas.interject);
    l.read("autoreg", c.lambdas.autoreg);
    l.check_unknown();
  }
  if (const json* v = s.get("alternation")) {
    Section l(*v, "attack.alternation");
    l.read("rounds", c.alternation.rounds);
    l.read("epsilon", c.alternation.epsilon);
    l.read("persist_defense", c.alternation.persist_defense);
    l.check_unknown();
  }
  s.check_unknown();
}

}  // namespace

PipelineConfig parse_config_json(const json& root, const std::string& base_dir) {
  PipelineConfig c;
  Section s(root, "");
  const json* backend = s.get("backend");
  if (!backend) config_error("backend", "required");
  read_backend(*backend, base_dir, c.backend);
  if (const json* v = s.get("detection")) read_detection(*v, c.detection);
  if (const json* v = s.get("reversal")) read_reversal(*v, base_dir, c.reversal);
  if (const json* v = s.get("attack")) read_attack(*v, base_dir, c);
  if (const json* v = s.get("benchmark")) {
    Section b(*v, "benchmark");
    b.read("parallelism", c.benchmark.parallelism);
    b.read("baseline", c.benchmark.baseline);
    b.check_unknown();
  }
  if (const json* v = s.get("layer_order")) {
    if (!v->is_array()) config_error("layer_order", "expected an array");
    c.layer_order.clear();
    for (const auto& e : *v) {
      if (!e.is_string()) config_error("layer_order", "expected layer names");
      const auto l = parse_pipeline_layer(e.get<std::string>());
      if (!l) config_error("layer_order", "unknown layer '" + e.get<std::string>() + "'");
      c.layer_order.push_back(*l);
    }
  }
  s.read_enum("on_flagged", c.on_flagged, parse_on_flagged);
  s.read("refuse_message", c.refuse_message);
  s.read("max_new_tokens", c.max_new_tokens);
  s.check_unknown();

  c.detection.layers = c.detection_layers();
  c.validate();
  return c;
}

PipelineConfig parse_config(const std::string& path) {
  std::string content;
  try {
    content = text::read_file(path);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::FileNotFound) fail(ErrorKind::ConfigError, "config file '" + path + "' not found");
    throw;
  }
  json root;
  try {
    root = json::parse(content);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ConfigError, path + ": invalid JSON: " + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config_json(root, dir.empty() ? "." : dir.string());
}

json config_to_json(const PipelineConfig& c) {
  json backend = {
      {"kind", to_string(c.backend.kind)},
      {"path", c.backend.model_path},
      {"endpoint", c.backend.endpoint},
      {"model", c.backend.model_name},
      {"timeout_s", c.backend.timeout_seconds},
      {"chat_template",
       {{"name", c.backend.chat_template.name},
        {"format", c.backend.chat_template.format},
        {"system_prompt", c.backend.chat_template.system_prompt}}},
      {"context_length", c.backend.context_length},
      {"vocab_size", c.backend.vocab_size},
      {"top_logprobs", c.backend.top_logprobs},
      {"logprob_floor", c.backend.logprob_floor},
  };
  if (c.backend.concurrency_safe) backend["concurrency_safe"] = *c.backend.concurrency_safe;

  const auto& d = c.detection;
  json detection = {
      {"repeat_instruction", d.repeat_instruction}, {"repeat_threshold", d.repeat_threshold},
      {"probe_question", d.probe_question},         {"probe_answer", d.probe_answer},
      {"interject_threshold", d.interject_threshold}, {"interject_mode", to_string(d.interject_mode)},
      {"generation_window", d.generation_window},   {"short_circuit", d.short_circuit},
      {"repeat_max_new_tokens", d.repeat_max_new_tokens},
  };
  const auto& r = c.reversal;
  json reversal = {
      {"init_prefix", r.init_prefix},     {"steps", r.steps},
      {"candidate_k", r.candidate_k},     {"batch_size", r.batch_size},
      {"checkpoint_every", r.checkpoint_every}, {"refusal_prefixes", r.refusal_prefixes},
      {"proposer", to_string(r.proposer)}, {"seed", r.seed},
      {"max_new_tokens", r.max_new_tokens},
  };
  const auto& a = c.attack;
  json attack = {
      {"target", a.target},
      {"max_iters", a.max_iters},
      {"suffix_init", a.suffix_init},
      {"candidate_k", a.candidate_k},
      {"batch_size", a.batch_size},
      {"seed", a.seed},
      {"proposer", to_string(a.proposer)},
      {"refusal_prefixes", a.refusal_prefixes},
      {"early_stop", a.early_stop},
      {"max_new_tokens", a.max_new_tokens},
      {"lambdas", {{"repeat", c.lambdas.repeat}, {"interject", c.lambdas.interject}, {"autoreg", c.lambdas.autoreg}}},
      {"alternation",
       {{"rounds", c.alternation.rounds},
        {"epsilon", c.alternation.epsilon},
        {"persist_defense", c.alternation.persist_defense}}},
  };
  json layers = json::array();
  for (auto l : c.layer_order) layers.push_back(to_string(l));
  return {
      {"backend", backend},
      {"detection", detection},
      {"reversal", reversal},
      {"attack", attack},
      {"benchmark", {{"parallelism", c.benchmark.parallelism}, {"baseline", c.benchmark.baseline}}},
      {"layer_order", layers},
      {"on_flagged", to_string(c.on_flagged)},
      {"refuse_message", c.refuse_message},
      {"max_new_tokens", c.max_new_tokens},
  };
}

std::string config_hash(const PipelineConfig& config) {
  // FNV-1a over the canonical dump; key order is sorted by nlohmann::json.
  const std::string s = config_to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace spin_guard
