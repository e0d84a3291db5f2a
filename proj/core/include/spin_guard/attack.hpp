#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "spin_guard/backend.hpp"
#include "spin_guard/detection.hpp"
#include "spin_guard/error.hpp"
#include "spin_guard/reversal.hpp"
#include "spin_guard/search.hpp"

namespace spin_guard {

struct AttackConfig {
  std::string target = "Sure, here's how";
  std::size_t max_iters = 500;
  std::string suffix_init = "! ! ! ! ! ! ! ! ! ! ! ! ! ! ! ! ! ! ! !";
  std::size_t candidate_k = 256;
  std::size_t batch_size = 50;
  std::uint64_t seed = 0;
  ProposerStrategy proposer = ProposerStrategy::LogitProxy;
  std::vector<std::string> refusal_prefixes = default_refusal_prefixes();
  // Stop as soon as the greedy completion is not a refusal.
  bool early_stop = true;
  std::size_t max_new_tokens = 64;

  void validate() const;
};

/// Penalty weights on the defense losses. All zero reduces to the plain
/// suffix attack objective.
struct Lambdas {
  double repeat = 0.0;
  double interject = 0.0;
  double autoreg = 0.0;

  bool all_zero() const noexcept { return repeat == 0.0 && interject == 0.0 && autoreg == 0.0; }
  void validate() const;
};

struct LossBreakdown {
  double attack = 0.0;
  double repeat = 0.0;
  double interject = 0.0;
  double autoreg = 0.0;
  double combined = 0.0;
};

double combine(const LossBreakdown& terms, const Lambdas& lambdas);

struct AttackIteration {
  std::size_t iteration = 0;
  LossBreakdown losses;
  bool success = false;
};

struct AttackState {
  TokenSequence suffix;
  LossBreakdown losses;
  std::size_t iteration = 0;
  bool success = false;
  std::string completion;
  std::vector<AttackIteration> trace;
};

class AttackAborted : public Error {
 public:
  AttackAborted(const Error& cause, AttackState partial);
  const AttackState& partial() const noexcept { return partial_; }

 private:
  AttackState partial_;
};

/// The attacked user message: x, a space, then the suffix text.
std::string attacked_prompt(std::string_view request, const TokenSequence& suffix,
                            const Backend& backend);

/// Teacher-forced mean NLL of `target` after the rendered attacked prompt.
double attack_loss(std::string_view request, const TokenSequence& suffix,
                   std::string_view target, const Backend& backend);

/// Every term of the Lagrangian objective on the attacked prompt.
LossBreakdown adaptive_loss(std::string_view request, const TokenSequence& suffix,
                            std::string_view target, const Lambdas& lambdas,
                            const Backend& backend, const DetectionConfig& detection);

AttackState suffix_attack(std::string_view request, const Backend& backend,
                          const AttackConfig& config);

AttackState adaptive_attack(std::string_view request, const Backend& backend,
                            const AttackConfig& config, const Lambdas& lambdas,
                            const DetectionConfig& detection = {});

struct AlternationConfig {
  std::size_t rounds = 3;
  double epsilon = 1e-6;
  // Start each round's defense from the previous prefix instead of init_prefix.
  bool persist_defense = false;
};

struct AlternationRound {
  std::size_t round = 0;
  double attack_initial = 0.0;
  double attack_final = 0.0;
  double defense_initial = 0.0;
  double defense_final = 0.0;
  std::string suffix;
  std::string defense_prefix;
  ReversalOutcome defense_outcome = ReversalOutcome::PassedAllSteps;
};

struct AlternationResult {
  std::string suffix;
  std::string defense_prefix;
  std::vector<AlternationRound> transcript;
  bool converged = false;
};

class AlternationAborted : public Error {
 public:
  AlternationAborted(const Error& cause, std::vector<AlternationRound> transcript);
  const std::vector<AlternationRound>& transcript() const noexcept { return transcript_; }

 private:
  std::vector<AlternationRound> transcript_;
};

AlternationResult alternating_attack_defense(std::string_view request, const Backend& backend,
                                             const AttackConfig& attack,
                                             const ReversalConfig& reversal,
                                             const AlternationConfig& alternation);

}  // namespace spin_guard
