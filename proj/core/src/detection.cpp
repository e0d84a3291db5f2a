#include "spin_guard/detection.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "spin_guard/error.hpp"
#include "spin_guard/text.hpp"

namespace spin_guard {

std::string_view to_string(DetectionLayer layer) {
  return layer == DetectionLayer::Repeat ? "repeat" : "interject";
}
std::string_view to_string(InterjectMode mode) { return mode == InterjectMode::Loss ? "loss" : "generation"; }
std::string_view to_string(Verdict verdict) { return verdict == Verdict::Benign ? "benign" : "flagged"; }

std::optional<DetectionLayer> parse_detection_layer(std::string_view s) {
  if (s == "repeat") return DetectionLayer::Repeat;
  if (s == "interject") return DetectionLayer::Interject;
  return std::nullopt;
}

std::optional<InterjectMode> parse_interject_mode(std::string_view s) {
  if (s == "loss") return InterjectMode::Loss;
  if (s == "generation") return InterjectMode::Generation;
  return std::nullopt;
}

void DetectionConfig::validate() const {
  if (!(repeat_threshold >= 0.0 && repeat_threshold <= 2.0))
    fail(ErrorKind::ConfigError, "detection.repeat_threshold must lie in [0, 2]");
  if (!(interject_threshold >= 0.0) || !std::isfinite(interject_threshold))
    fail(ErrorKind::ConfigError, "detection.interject_threshold must be finite and >= 0");
  if (generation_window < 1) fail(ErrorKind::ConfigError, "detection.generation_window must be >= 1");
  if (repeat_max_new_tokens < 1) fail(ErrorKind::ConfigError, "detection.repeat_max_new_tokens must be >= 1");
  if (probe_answer.empty()) fail(ErrorKind::ConfigError, "detection.probe_answer must not be empty");
  std::set<DetectionLayer> seen;
  for (auto l : layers)
    if (!seen.insert(l).second) fail(ErrorKind::ConfigError, "detection layer listed twice: " + std::string(to_string(l)));
}

const LayerResult* DetectionReport::find(DetectionLayer layer) const {
  for (const auto& l : layers)
    if (l.layer == layer) return &l;
  return nullptr;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  const auto x = text::to_code_points(a);
  const auto y = text::to_code_points(b);
  if (x.size() < y.size()) return levenshtein(b, a);
  std::vector<std::size_t> row(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (x[i - 1] == y[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[y.size()];
}

std::string normalize_echo(std::string_view generated) {
  auto s = text::trim(generated);
  auto strip = [&](std::string_view open, std::string_view close) {
    if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
      s = text::trim(s.substr(open.size(), s.size() - open.size() - close.size()));
      return true;
    }
    return false;
  };
  if (!strip("\"", "\"")) strip("“", "”");
  return std::string(s);
}

double repeat_loss_value(std::string_view request, std::string_view generated) {
  const auto x = text::trim(request);
  const auto y = normalize_echo(generated);
  const auto nx = text::to_code_points(x).size();
  const auto ny = text::to_code_points(y).size();
  if (nx + ny == 0) return 0.0;
  return 2.0 * static_cast<double>(levenshtein(x, y)) / static_cast<double>(nx + ny);
}

std::string repeat_prompt(std::string_view request, const DetectionConfig& config) {
  return config.repeat_instruction + "\"" + std::string(request) + "\"";
}

std::string interjection_prompt(std::string_view request, const DetectionConfig& config) {
  return std::string(request) + " " + config.probe_question;
}

double repeat_loss(std::string_view request, const Backend& backend, const DetectionConfig& config) {
  return repeat_loss(request, backend, config, nullptr);
}

double repeat_loss(std::string_view request, const Backend& backend, const DetectionConfig& config,
                   std::string* generated) {
  if (request.empty()) fail(ErrorKind::InvalidArgument, "repeat_loss needs a non-empty request");
  const auto g = backend.generate(repeat_prompt(request, config),
                                  DecodeParams{config.repeat_max_new_tokens, 0.0, 0});
  if (generated) *generated = g.text;
  return repeat_loss_value(request, g.text);
}

double interjection_loss(std::string_view request, const Backend& backend, const DetectionConfig& config) {
  const auto answer = backend.tokenize(config.probe_answer);
  if (answer.empty()) fail(ErrorKind::InvalidArgument, "probe answer tokenizes to nothing");
  const auto context = backend.tokenize(backend.render_prompt(interjection_prompt(request, config)));
  return token_nll(backend.next_token_logits(context), answer.ids.front());
}

bool interjection_generation_check(std::string_view request, const Backend& backend,
                                   const DetectionConfig& config, std::string* generated) {
  if (config.generation_window < 1) fail(ErrorKind::InvalidArgument, "generation_window must be >= 1");
  auto g = backend.generate(interjection_prompt(request, config),
                            DecodeParams{config.generation_window, 0.0, 0});
  std::string window = g.text;
  if (g.tokens.size() > config.generation_window) {
    g.tokens.ids.resize(config.generation_window);
    window = backend.detokenize(g.tokens.ids);
  }
  if (generated) *generated = window;
  return text::contains_icase(window, config.probe_answer);
}

Verdict reevaluate(DetectionReport& report) {
  bool flagged = false;
  for (auto& l : report.layers) {
    if (l.loss) l.passed = *l.loss <= l.threshold;
    flagged = flagged || !l.passed;
  }
  report.verdict = flagged ? Verdict::Flagged : Verdict::Benign;
  return report.verdict;
}

DetectionReport detect(std::string_view request, const Backend& backend, const DetectionConfig& config) {
  config.validate();
  if (config.layers.empty()) fail(ErrorKind::ConfigError, "detect needs at least one enabled layer");

  DetectionReport report;
  for (auto layer : config.layers) {
    LayerResult r;
    r.layer = layer;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (layer == DetectionLayer::Repeat) {
        r.threshold = config.repeat_threshold;
        r.loss = repeat_loss(request, backend, config, &r.generated_text);
        r.passed = *r.loss <= r.threshold;
      } else {
        r.threshold = config.interject_threshold;
        r.approximate = backend.approximate_logits();
        if (config.interject_mode == InterjectMode::Loss) {
          r.loss = interjection_loss(request, backend, config);
          r.passed = *r.loss <= r.threshold;
        } else {
          r.passed = interjection_generation_check(request, backend, config, &r.generated_text);
        }
      }
    } catch (const Error& e) {
      throw e.with_stage(std::string(to_string(layer)));
    }
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const bool failed = !r.passed;
    report.layers.push_back(std::move(r));
    if (failed) report.verdict = Verdict::Flagged;
    if (failed && config.short_circuit) break;
  }
  return report;
}

}  // namespace spin_guard
