#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spin_guard/backend.hpp"
#include "spin_guard/pipeline.hpp"

namespace spin_guard {

enum class Label { Benign, Malicious };
std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view s);

struct RequestRecord {
  std::string id;
  std::string text;
  Label label = Label::Malicious;
  std::optional<std::string> attack_kind;
  std::optional<std::string> template_id;

  friend bool operator==(const RequestRecord&, const RequestRecord&) = default;
};

/**
 * Loads a request CSV. Recognized columns: id, text (or goal), label,
 * attack_kind, template_id. A missing id column yields "row-<n>"; a missing
 * label column requires `label_override`.
 */
std::vector<RequestRecord> load_requests(const std::string& path,
                                         std::optional<Label> label_override = std::nullopt);
std::vector<RequestRecord> parse_requests(std::string_view csv,
                                          std::optional<Label> label_override = std::nullopt);

struct AttackTemplate {
  std::string id;
  std::string body;
};

inline constexpr std::string_view kRequestSlot = "{request}";

std::string apply_attack_template(std::string_view template_body, const RequestRecord& request);

/// Every *.txt file of `dir`, sorted by file name.
std::vector<AttackTemplate> load_templates(const std::string& dir);

/**
 * Pairs each template with `per_template` malicious requests drawn without
 * replacement (all of them when per_template is 0 or exceeds the pool).
 */
std::vector<RequestRecord> pair_templates(const std::vector<AttackTemplate>& templates,
                                          const std::vector<RequestRecord>& requests,
                                          std::size_t per_template, std::uint64_t seed);

struct EvalRecord {
  static constexpr int kSchemaVersion = 1;

  std::string request_id;
  Label label = Label::Malicious;
  std::optional<std::string> attack_kind;
  std::string config_hash;
  std::optional<FinalResponse> response;
  std::string output;
  // Undefined (nullopt) for benign requests.
  std::optional<bool> attack_success;
  std::optional<std::string> baseline_output;
  std::optional<bool> baseline_attack_success;
  StageLatency latency;
  std::optional<std::string> error;
  std::string timestamp;
};

bool is_attack_success(const FinalResponse& response,
                       const std::vector<std::string>& refusal_prefixes);

/// Fraction of malicious records with attack_success; throws NoMaliciousRecords.
double asr(const std::vector<EvalRecord>& records);

struct RocPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // ascending threshold, -inf first
  double auc = 0.0;
};

/// Benign are negatives; a loss strictly above the threshold predicts
/// malicious. Throws EmptyClass when either list is empty.
RocCurve roc(const std::vector<double>& benign_losses, const std::vector<double>& malicious_losses);

/// Threshold maximizing tpr - fpr, lowest threshold on ties.
double best_threshold(const RocCurve& curve);

struct LatencyStats {
  double mean = 0.0;
  double median = 0.0;
};

struct BenchmarkSummary {
  std::size_t total = 0;
  std::size_t malicious = 0;
  std::size_t benign = 0;
  std::size_t errors = 0;
  std::optional<double> asr;
  std::optional<double> baseline_asr;
  std::map<std::string, double> asr_by_kind;
  double benign_pass_rate = 1.0;
  // Keys: standard, repeat, interjection, reversal, full.
  std::map<std::string, LatencyStats> latency;
};

struct BenchmarkRun {
  std::vector<EvalRecord> records;  // dataset order
  BenchmarkSummary summary;
};

class JsonlWriter;

/**
 * Runs the defense over every record. Per-record failures are stored in the
 * row. Records are streamed to `sink` (if any) in completion order.
 */
BenchmarkRun run_benchmark(const std::vector<RequestRecord>& dataset,
                           const PipelineConfig& config, const Backend& backend,
                           JsonlWriter* sink = nullptr);

BenchmarkSummary summarize(const std::vector<EvalRecord>& records);
std::string format_summary(const BenchmarkSummary& summary);

}  // namespace spin_guard
