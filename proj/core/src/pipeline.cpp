#include "spin_guard/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <set>

namespace spin_guard {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

std::string_view to_string(PipelineLayer layer) {
  switch (layer) {
    case PipelineLayer::Repeat: return "repeat";
    case PipelineLayer::Interject: return "interject";
    case PipelineLayer::Reversal: return "reversal";
  }
  return "unknown";
}

std::string_view to_string(OnFlagged mode) {
  return mode == OnFlagged::RefuseMessage ? "refuse_message" : "report_only";
}

std::string_view to_string(ResponseVerdict verdict) {
  switch (verdict) {
    case ResponseVerdict::BenignAnswered: return "benign_answered";
    case ResponseVerdict::FlaggedRefused: return "flagged_refused";
    case ResponseVerdict::ReversalRefused: return "reversal_refused";
    case ResponseVerdict::DefendedAnswered: return "defended_answered";
  }
  return "unknown";
}

std::optional<PipelineLayer> parse_pipeline_layer(std::string_view s) {
  if (s == "repeat") return PipelineLayer::Repeat;
  if (s == "interject" || s == "interjection") return PipelineLayer::Interject;
  if (s == "reversal") return PipelineLayer::Reversal;
  return std::nullopt;
}

std::optional<OnFlagged> parse_on_flagged(std::string_view s) {
  if (s == "refuse_message") return OnFlagged::RefuseMessage;
  if (s == "report_only") return OnFlagged::ReportOnly;
  return std::nullopt;
}

std::optional<ResponseVerdict> parse_response_verdict(std::string_view s) {
  for (auto v : {ResponseVerdict::BenignAnswered, ResponseVerdict::FlaggedRefused, ResponseVerdict::ReversalRefused,
                 ResponseVerdict::DefendedAnswered})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

bool PipelineConfig::has_layer(PipelineLayer layer) const {
  return std::find(layer_order.begin(), layer_order.end(), layer) != layer_order.end();
}

std::vector<DetectionLayer> PipelineConfig::detection_layers() const {
  std::vector<DetectionLayer> out;
  for (auto l : layer_order) {
    if (l == PipelineLayer::Repeat) out.push_back(DetectionLayer::Repeat);
    if (l == PipelineLayer::Interject) out.push_back(DetectionLayer::Interject);
  }
  return out;
}

void PipelineConfig::validate() const {
  if (layer_order.empty()) fail(ErrorKind::ConfigError, "layer_order must name at least one layer");
  std::set<PipelineLayer> seen;
  for (auto l : layer_order)
    if (!seen.insert(l).second)
      fail(ErrorKind::ConfigError, "layer_order lists '" + std::string(to_string(l)) + "' twice");
  backend.validate();
  DetectionConfig d = detection;
  d.layers = detection_layers();
  d.validate();
  reversal.validate();
  attack.validate();
  lambdas.validate();
  if (max_new_tokens < 1) fail(ErrorKind::ConfigError, "max_new_tokens must be >= 1");
  if (benchmark.parallelism < 1) fail(ErrorKind::ConfigError, "benchmark.parallelism must be >= 1");
  if (alternation.rounds < 1) fail(ErrorKind::ConfigError, "attack.alternation.rounds must be >= 1");
  if (!(alternation.epsilon >= 0.0)) fail(ErrorKind::ConfigError, "attack.alternation.epsilon must be >= 0");
}

FinalResponse defend(std::string_view request, const PipelineConfig& config, const Backend& backend) {
  config.validate();
  if (request.empty()) fail(ErrorKind::InvalidArgument, "request must not be empty");
  const auto t_full = Clock::now();
  FinalResponse out;

  DetectionConfig det = config.detection;
  det.layers = config.detection_layers();
  if (!det.layers.empty()) {
    out.detection = detect(request, backend, det);
    for (const auto& l : out.detection.layers) {
      if (l.layer == DetectionLayer::Repeat) out.latency.repeat = l.wall_ms;
      if (l.layer == DetectionLayer::Interject) out.latency.interjection = l.wall_ms;
    }
  }

  if (out.detection.verdict == Verdict::Flagged && config.on_flagged == OnFlagged::RefuseMessage) {
    out.verdict = ResponseVerdict::FlaggedRefused;
    out.output = config.refuse_message;
  } else if (config.has_layer(PipelineLayer::Reversal)) {
    const auto t0 = Clock::now();
    try {
      out.reversal = reverse(request, backend, config.reversal);
    } catch (const Error& e) {
      throw e.with_stage("reversal");
    }
    out.latency.reversal = elapsed_ms(t0);
    out.latency.standard = out.reversal->completion_ms;
    out.output = out.reversal->final_completion;
    out.verdict = out.reversal->outcome == ReversalOutcome::RefusalTriggered ? ResponseVerdict::ReversalRefused
                                                                            : ResponseVerdict::DefendedAnswered;
  } else {
    const auto t0 = Clock::now();
    try {
      out.output = backend.generate(request, DecodeParams{config.max_new_tokens, 0.0, config.reversal.seed}).text;
    } catch (const Error& e) {
      throw e.with_stage("generate");
    }
    out.latency.standard = elapsed_ms(t0);
    out.verdict = ResponseVerdict::BenignAnswered;
  }
  out.latency.full = elapsed_ms(t_full);
  return out;
}

}  // namespace spin_guard
