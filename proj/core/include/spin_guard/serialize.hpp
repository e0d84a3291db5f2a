#pragma once

#include <nlohmann/json.hpp>

#include "spin_guard/attack.hpp"
#include "spin_guard/detection.hpp"
#include "spin_guard/evaluation.hpp"
#include "spin_guard/pipeline.hpp"
#include "spin_guard/reversal.hpp"

namespace spin_guard {

void to_json(nlohmann::json& j, const LayerResult& v);
void from_json(const nlohmann::json& j, LayerResult& v);
void to_json(nlohmann::json& j, const DetectionReport& v);
void from_json(const nlohmann::json& j, DetectionReport& v);

void to_json(nlohmann::json& j, const Checkpoint& v);
void from_json(const nlohmann::json& j, Checkpoint& v);
void to_json(nlohmann::json& j, const ReversalResult& v);
void from_json(const nlohmann::json& j, ReversalResult& v);

void to_json(nlohmann::json& j, const LossBreakdown& v);
void to_json(nlohmann::json& j, const AttackState& v);
void to_json(nlohmann::json& j, const AlternationResult& v);

void to_json(nlohmann::json& j, const StageLatency& v);
void from_json(const nlohmann::json& j, StageLatency& v);
void to_json(nlohmann::json& j, const FinalResponse& v);
void from_json(const nlohmann::json& j, FinalResponse& v);

void to_json(nlohmann::json& j, const EvalRecord& v);
void from_json(const nlohmann::json& j, EvalRecord& v);

void to_json(nlohmann::json& j, const RocCurve& v);
void to_json(nlohmann::json& j, const BenchmarkSummary& v);

/// Thresholds may be infinite; they serialize as "-inf"/"inf".
nlohmann::json threshold_to_json(double t);

/// Copy of `j` with every latency/timestamp field removed.
nlohmann::json mask_timing(nlohmann::json j);

}  // namespace spin_guard
