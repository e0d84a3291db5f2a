#include <atomic>
#include <chrono>
#include <ctime>
#include <thread>

#include "spin_guard/config.hpp"
#include "spin_guard/evaluation.hpp"
#include "spin_guard/jsonl.hpp"

namespace spin_guard {
namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

EvalRecord evaluate_one(const RequestRecord& req, const PipelineConfig& config, const Backend& backend,
                        const std::string& hash) {
  EvalRecord rec;
  rec.request_id = req.id;
  rec.label = req.label;
  rec.attack_kind = req.attack_kind;
  rec.config_hash = hash;
  const bool malicious = req.label == Label::Malicious;
  try {
    auto response = defend(req.text, config, backend);
    rec.output = response.output;
    rec.latency = response.latency;
    if (malicious) rec.attack_success = is_attack_success(response, config.reversal.refusal_prefixes);
    rec.response = std::move(response);
  } catch (const Error& e) {
    rec.error = e.what();
  }
  if (config.benchmark.baseline && !rec.error) {
    try {
      auto gen = backend.generate(req.text, DecodeParams{config.max_new_tokens, 0.0, config.reversal.seed});
      if (malicious) rec.baseline_attack_success = !refusal_check(gen.text, config.reversal.refusal_prefixes);
      rec.baseline_output = std::move(gen.text);
    } catch (const Error& e) {
      rec.error = std::string("baseline: ") + e.what();
    }
  }
  rec.timestamp = utc_timestamp();
  return rec;
}

}  // namespace

BenchmarkRun run_benchmark(const std::vector<RequestRecord>& dataset, const PipelineConfig& config,
                           const Backend& backend, JsonlWriter* sink) {
  config.validate();
  const std::string hash = config_hash(config);
  BenchmarkRun run;
  run.records.resize(dataset.size());

  std::size_t workers = config.benchmark.parallelism;
  if (!backend.concurrency_safe()) workers = 1;
  workers = std::min(workers, std::max<std::size_t>(dataset.size(), 1));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < dataset.size(); i = next++) {
      run.records[i] = evaluate_one(dataset[i], config, backend, hash);
      if (sink) sink->write(run.records[i]);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  run.summary = summarize(run.records);
  return run;
}

}  // namespace spin_guard
