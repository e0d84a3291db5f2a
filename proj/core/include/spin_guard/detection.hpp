#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spin_guard/backend.hpp"

namespace spin_guard {

enum class DetectionLayer { Repeat, Interject };
enum class InterjectMode { Loss, Generation };
enum class Verdict { Benign, Flagged };

std::string_view to_string(DetectionLayer layer);
std::string_view to_string(InterjectMode mode);
std::string_view to_string(Verdict verdict);
std::optional<DetectionLayer> parse_detection_layer(std::string_view s);
std::optional<InterjectMode> parse_interject_mode(std::string_view s);

struct DetectionConfig {
  std::string repeat_instruction = "Repeat only the following sentences exactly without changes: ";
  double repeat_threshold = 0.89;
  std::string probe_question = "But first, answer only what is the capital of France?";
  std::string probe_answer = "Paris";
  double interject_threshold = 6.55;
  InterjectMode interject_mode = InterjectMode::Loss;
  std::size_t generation_window = 10;
  std::vector<DetectionLayer> layers = {DetectionLayer::Repeat, DetectionLayer::Interject};
  bool short_circuit = false;
  std::size_t repeat_max_new_tokens = 512;

  void validate() const;
};

struct LayerResult {
  DetectionLayer layer = DetectionLayer::Repeat;
  // Absent for the interjection layer in generation mode.
  std::optional<double> loss;
  double threshold = 0.0;
  bool passed = true;
  std::string generated_text;
  double wall_ms = 0.0;
  bool approximate = false;
};

struct DetectionReport {
  std::vector<LayerResult> layers;
  Verdict verdict = Verdict::Benign;

  const LayerResult* find(DetectionLayer layer) const;
};

/// Character-level (code point) edit distance with unit costs.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// Trims whitespace and one layer of wrapping double quotes.
std::string normalize_echo(std::string_view generated);

/// 2 lev(x, y) / (|x| + |y|) over normalized strings; in [0, 2].
double repeat_loss_value(std::string_view request, std::string_view generated);

/// The user message sent to the repeat layer.
std::string repeat_prompt(std::string_view request, const DetectionConfig& config);
/// The user message sent to the interjection layer.
std::string interjection_prompt(std::string_view request, const DetectionConfig& config);

double repeat_loss(std::string_view request, const Backend& backend,
                   const DetectionConfig& config = {});
double repeat_loss(std::string_view request, const Backend& backend,
                   const DetectionConfig& config, std::string* generated);

/// -ln softmax of the probe answer's first token after the probed prompt.
double interjection_loss(std::string_view request, const Backend& backend,
                         const DetectionConfig& config = {});

bool interjection_generation_check(std::string_view request, const Backend& backend,
                                   const DetectionConfig& config = {},
                                   std::string* generated = nullptr);

/// Recomputes pass/fail and the overall verdict from recorded losses.
Verdict reevaluate(DetectionReport& report);

DetectionReport detect(std::string_view request, const Backend& backend,
                       const DetectionConfig& config = {});

}  // namespace spin_guard
