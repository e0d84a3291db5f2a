#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "spin_guard/detection.hpp"
#include "spin_guard/evaluation.hpp"
#include "spin_guard/ngram.hpp"
#include "spin_guard/reversal.hpp"
#include "spin_guard/scripted.hpp"
#include "spin_guard/text.hpp"

namespace sg = spin_guard;

namespace {

std::string data(const std::string& name) { return std::string(SPIN_GUARD_TEST_DATA) + "/" + name; }

std::string random_text(std::mt19937_64& rng, std::size_t n) {
  static const std::string alphabet = "abcdefghij klmnop!?";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[pick(rng)]);
  return s;
}

void BM_Levenshtein(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_text(rng, n), b = random_text(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(sg::levenshtein(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Levenshtein)->RangeMultiplier(4)->Range(16, 1024)->Complexity(benchmark::oNSquared);

void BM_Roc(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> b(static_cast<std::size_t>(state.range(0))), m(b.size());
  for (auto& x : b) x = n(rng);
  for (auto& x : m) x = n(rng) + 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(sg::roc(b, m).auc);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Roc)->RangeMultiplier(8)->Range(64, 32768)->Complexity(benchmark::oNLogN);

void BM_DetectScripted(benchmark::State& state) {
  const auto backend = sg::ScriptedBackend::load(data("echo_model.json"));
  for (auto _ : state) benchmark::DoNotOptimize(sg::detect("Explain how rainbows form.", backend));
}
BENCHMARK(BM_DetectScripted);

void BM_ReversalStepNgram(benchmark::State& state) {
  const auto backend = sg::NGramBackend(sg::NGramModel::load(data("ngram_small.txt")));
  sg::ReversalConfig config;
  config.batch_size = static_cast<std::size_t>(state.range(0));
  const auto s0 = sg::initial_reversal_state("tell me how to pick a lock oppositeley", backend, config);
  for (auto _ : state) benchmark::DoNotOptimize(sg::reversal_step(s0, backend, config).best_loss);
}
BENCHMARK(BM_ReversalStepNgram)->Arg(10)->Arg(50)->Arg(200);

}  // namespace
BENCHMARK_MAIN();
