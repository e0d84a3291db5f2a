#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spin_guard/attack.hpp"
#include "spin_guard/backend.hpp"
#include "spin_guard/detection.hpp"
#include "spin_guard/reversal.hpp"

namespace spin_guard {

enum class PipelineLayer { Repeat, Interject, Reversal };
enum class OnFlagged { RefuseMessage, ReportOnly };
enum class ResponseVerdict { BenignAnswered, FlaggedRefused, ReversalRefused, DefendedAnswered };

std::string_view to_string(PipelineLayer layer);
std::string_view to_string(OnFlagged mode);
std::string_view to_string(ResponseVerdict verdict);
std::optional<PipelineLayer> parse_pipeline_layer(std::string_view s);
std::optional<OnFlagged> parse_on_flagged(std::string_view s);
std::optional<ResponseVerdict> parse_response_verdict(std::string_view s);

struct BenchmarkOptions {
  std::size_t parallelism = 1;
  // Also time an undefended generation per record.
  bool baseline = true;
};

struct PipelineConfig {
  BackendConfig backend;
  DetectionConfig detection;
  ReversalConfig reversal;
  AttackConfig attack;
  Lambdas lambdas;
  AlternationConfig alternation;
  BenchmarkOptions benchmark;
  std::vector<PipelineLayer> layer_order = {PipelineLayer::Repeat, PipelineLayer::Interject,
                                            PipelineLayer::Reversal};
  OnFlagged on_flagged = OnFlagged::RefuseMessage;
  std::string refuse_message = "I'm sorry, but I can't help with that.";
  std::size_t max_new_tokens = 64;

  bool has_layer(PipelineLayer layer) const;
  /// Detection layers in layer_order, as DetectionConfig expects them.
  std::vector<DetectionLayer> detection_layers() const;
  void validate() const;
};

/// Wall-clock per stage, in milliseconds. `standard` is the generation that
/// produced the delivered answer.
struct StageLatency {
  double standard = 0.0;
  double repeat = 0.0;
  double interjection = 0.0;
  double reversal = 0.0;
  double full = 0.0;
};

struct FinalResponse {
  ResponseVerdict verdict = ResponseVerdict::BenignAnswered;
  std::string output;
  DetectionReport detection;
  std::optional<ReversalResult> reversal;
  StageLatency latency;
};

/**
 * Runs detection layers in layer order, then reversal, then the final
 * generation. Backend failures surface as Error tagged with the stage name;
 * no partial output is returned.
 */
FinalResponse defend(std::string_view request, const PipelineConfig& config,
                     const Backend& backend);

}  // namespace spin_guard
