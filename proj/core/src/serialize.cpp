#include "spin_guard/serialize.hpp"

#include <cmath>
#include <limits>

namespace spin_guard {
namespace {

using nlohmann::json;

// JSON has no infinities; they travel as strings.
json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double to_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw json::type_error::create(302, "expected a number", &j);
}

json numbers(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

template <typename E, typename Parse>
E parse_enum(const json& j, Parse parse) {
  const auto v = parse(j.get<std::string>());
  if (!v) throw json::other_error::create(501, "unknown enum value '" + j.get<std::string>() + "'", &j);
  return *v;
}

std::optional<Label> parse_label_exact(std::string_view s) {
  if (s == "benign") return Label::Benign;
  if (s == "malicious") return Label::Malicious;
  return std::nullopt;
}

json sequence_json(const TokenSequence& s) { return {{"ids", s.ids}, {"text", s.text}}; }

TokenSequence sequence_from(const json& j) {
  TokenSequence s;
  j.at("ids").get_to(s.ids);
  j.at("text").get_to(s.text);
  return s;
}

void strip_timing(json& j) {
  if (j.is_object()) {
    for (const char* key : {"wall_ms", "latency_ms", "completion_ms", "timestamp"}) j.erase(key);
    for (auto& [k, v] : j.items()) strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) strip_timing(v);
  }
}

}  // namespace

json threshold_to_json(double t) { return number(t); }

void to_json(json& j, const LayerResult& v) {
  j = {{"layer", to_string(v.layer)},
       {"loss", v.loss ? number(*v.loss) : json(nullptr)},
       {"threshold", number(v.threshold)},
       {"passed", v.passed},
       {"generated_text", v.generated_text},
       {"wall_ms", v.wall_ms},
       {"approximate", v.approximate}};
}

void from_json(const json& j, LayerResult& v) {
  v.layer = parse_enum<DetectionLayer>(j.at("layer"), parse_detection_layer);
  const auto& loss = j.at("loss");
  v.loss = loss.is_null() ? std::nullopt : std::optional<double>(to_number(loss));
  v.threshold = to_number(j.at("threshold"));
  j.at("passed").get_to(v.passed);
  j.at("generated_text").get_to(v.generated_text);
  v.wall_ms = j.value("wall_ms", 0.0);
  v.approximate = j.value("approximate", false);
}

void to_json(json& j, const DetectionReport& v) {
  j = {{"verdict", to_string(v.verdict)}, {"layers", v.layers}};
}

void from_json(const json& j, DetectionReport& v) {
  const auto s = j.at("verdict").get<std::string>();
  if (s != "benign" && s != "flagged") throw json::other_error::create(501, "unknown verdict '" + s + "'", &j);
  v.verdict = s == "benign" ? Verdict::Benign : Verdict::Flagged;
  j.at("layers").get_to(v.layers);
}

void to_json(json& j, const Checkpoint& v) {
  j = {{"step", v.step}, {"refused", v.refused}, {"generated_text", v.generated_text}};
}

void from_json(const json& j, Checkpoint& v) {
  j.at("step").get_to(v.step);
  j.at("refused").get_to(v.refused);
  j.at("generated_text").get_to(v.generated_text);
}

void to_json(json& j, const ReversalResult& v) {
  j = {{"outcome", to_string(v.outcome)},
       {"final_prefix", v.final_prefix},
       {"final_completion", v.final_completion},
       {"completion_ms", v.completion_ms},
       {"steps_run", v.state.step},
       {"best_loss", number(v.state.best_loss)},
       {"loss_trace", numbers(v.state.loss_trace)},
       {"checkpoints", v.state.checkpoints},
       {"prefix", sequence_json(v.state.prefix)},
       {"request", sequence_json(v.state.request)}};
}

void from_json(const json& j, ReversalResult& v) {
  const auto outcome = j.at("outcome").get<std::string>();
  if (outcome == "refusal_triggered") {
    v.outcome = ReversalOutcome::RefusalTriggered;
  } else if (outcome == "passed_all_steps") {
    v.outcome = ReversalOutcome::PassedAllSteps;
  } else {
    throw json::other_error::create(501, "unknown reversal outcome '" + outcome + "'", &j);
  }
  j.at("final_prefix").get_to(v.final_prefix);
  j.at("final_completion").get_to(v.final_completion);
  v.completion_ms = j.value("completion_ms", 0.0);
  j.at("steps_run").get_to(v.state.step);
  v.state.best_loss = to_number(j.at("best_loss"));
  v.state.loss_trace.clear();
  for (const auto& x : j.at("loss_trace")) v.state.loss_trace.push_back(to_number(x));
  j.at("checkpoints").get_to(v.state.checkpoints);
  v.state.prefix = sequence_from(j.at("prefix"));
  v.state.request = sequence_from(j.at("request"));
}

void to_json(json& j, const LossBreakdown& v) {
  j = {{"attack", number(v.attack)},
       {"repeat", number(v.repeat)},
       {"interject", number(v.interject)},
       {"autoreg", number(v.autoreg)},
       {"combined", number(v.combined)}};
}

void to_json(json& j, const AttackState& v) {
  json trace = json::array();
  for (const auto& it : v.trace) trace.push_back({{"iteration", it.iteration}, {"losses", it.losses}, {"success", it.success}});
  j = {{"suffix", v.suffix.text},
       {"suffix_ids", v.suffix.ids},
       {"losses", v.losses},
       {"iterations", v.iteration},
       {"success", v.success},
       {"completion", v.completion},
       {"trace", trace}};
}

void to_json(json& j, const AlternationResult& v) {
  json rounds = json::array();
  for (const auto& r : v.transcript)
    rounds.push_back({{"round", r.round},
                      {"attack_initial", number(r.attack_initial)},
                      {"attack_final", number(r.attack_final)},
                      {"defense_initial", number(r.defense_initial)},
                      {"defense_final", number(r.defense_final)},
                      {"suffix", r.suffix},
                      {"defense_prefix", r.defense_prefix},
                      {"defense_outcome", to_string(r.defense_outcome)}});
  j = {{"suffix", v.suffix}, {"defense_prefix", v.defense_prefix}, {"converged", v.converged}, {"rounds", rounds}};
}

void to_json(json& j, const StageLatency& v) {
  j = {{"standard", v.standard},
       {"repeat", v.repeat},
       {"interjection", v.interjection},
       {"reversal", v.reversal},
       {"full", v.full}};
}

void from_json(const json& j, StageLatency& v) {
  j.at("standard").get_to(v.standard);
  j.at("repeat").get_to(v.repeat);
  j.at("interjection").get_to(v.interjection);
  j.at("reversal").get_to(v.reversal);
  j.at("full").get_to(v.full);
}

void to_json(json& j, const FinalResponse& v) {
  j = {{"verdict", to_string(v.verdict)},
       {"output", v.output},
       {"detection", v.detection},
       {"reversal", v.reversal ? json(*v.reversal) : json(nullptr)},
       {"latency_ms", v.latency}};
}

void from_json(const json& j, FinalResponse& v) {
  v.verdict = parse_enum<ResponseVerdict>(j.at("verdict"), parse_response_verdict);
  j.at("output").get_to(v.output);
  j.at("detection").get_to(v.detection);
  v.reversal = optional_from<ReversalResult>(j, "reversal");
  if (j.contains("latency_ms")) j.at("latency_ms").get_to(v.latency);
}

void to_json(json& j, const EvalRecord& v) {
  j = {{"schema_version", EvalRecord::kSchemaVersion},
       {"request_id", v.request_id},
       {"label", to_string(v.label)},
       {"attack_kind", optional_json(v.attack_kind)},
       {"config_hash", v.config_hash},
       {"response", v.response ? json(*v.response) : json(nullptr)},
       {"output", v.output},
       {"attack_success", optional_json(v.attack_success)},
       {"baseline_output", optional_json(v.baseline_output)},
       {"baseline_attack_success", optional_json(v.baseline_attack_success)},
       {"latency_ms", v.latency},
       {"error", optional_json(v.error)},
       {"timestamp", v.timestamp}};
}

void from_json(const json& j, EvalRecord& v) {
  const int version = j.at("schema_version").get<int>();
  if (version != EvalRecord::kSchemaVersion)
    throw json::other_error::create(501, "unsupported schema_version " + std::to_string(version), &j);
  j.at("request_id").get_to(v.request_id);
  v.label = parse_enum<Label>(j.at("label"), parse_label_exact);
  v.attack_kind = optional_from<std::string>(j, "attack_kind");
  j.at("config_hash").get_to(v.config_hash);
  v.response = optional_from<FinalResponse>(j, "response");
  j.at("output").get_to(v.output);
  v.attack_success = optional_from<bool>(j, "attack_success");
  v.baseline_output = optional_from<std::string>(j, "baseline_output");
  v.baseline_attack_success = optional_from<bool>(j, "baseline_attack_success");
  if (j.contains("latency_ms")) j.at("latency_ms").get_to(v.latency);
  v.error = optional_from<std::string>(j, "error");
  v.timestamp = j.value("timestamp", "");
}

void to_json(json& j, const RocCurve& v) {
  json points = json::array();
  for (const auto& p : v.points) points.push_back({{"threshold", number(p.threshold)}, {"tpr", p.tpr}, {"fpr", p.fpr}});
  j = {{"auc", v.auc}, {"points", points}};
}

void to_json(json& j, const BenchmarkSummary& v) {
  json latency = json::object();
  for (const auto& [stage, s] : v.latency) latency[stage] = {{"mean", s.mean}, {"median", s.median}};
  j = {{"total", v.total},
       {"malicious", v.malicious},
       {"benign", v.benign},
       {"errors", v.errors},
       {"asr", optional_json(v.asr)},
       {"baseline_asr", optional_json(v.baseline_asr)},
       {"asr_by_kind", v.asr_by_kind},
       {"benign_pass_rate", v.benign_pass_rate},
       {"latency_ms", latency}};
}

json mask_timing(json j) {
  strip_timing(j);
  return j;
}

}  // namespace spin_guard
