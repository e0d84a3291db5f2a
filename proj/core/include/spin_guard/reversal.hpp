#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "spin_guard/backend.hpp"
#include "spin_guard/error.hpp"
#include "spin_guard/search.hpp"

namespace spin_guard {

std::vector<std::string> default_refusal_prefixes();

struct ReversalConfig {
  std::string init_prefix = "! ! ! ! !";
  std::size_t steps = 25;
  std::size_t candidate_k = 256;
  std::size_t batch_size = 50;
  std::size_t checkpoint_every = 5;
  std::vector<std::string> refusal_prefixes = default_refusal_prefixes();
  ProposerStrategy proposer = ProposerStrategy::LogitProxy;
  std::uint64_t seed = 0;
  std::size_t max_new_tokens = 64;

  void validate() const;
};

struct Checkpoint {
  std::size_t step = 0;
  bool refused = false;
  std::string generated_text;
};

struct ReversalState {
  TokenSequence prefix;
  TokenSequence request;  // frozen
  double best_loss = 0.0;
  std::size_t step = 0;
  // loss_trace[0] is the initial loss, then one entry per step.
  std::vector<double> loss_trace;
  std::vector<Checkpoint> checkpoints;
};

enum class ReversalOutcome { RefusalTriggered, PassedAllSteps };
std::string_view to_string(ReversalOutcome outcome);

struct ReversalResult {
  std::string final_prefix;
  ReversalOutcome outcome = ReversalOutcome::PassedAllSteps;
  std::string final_completion;
  ReversalState state;
  // Wall time of the generate call that produced final_completion.
  double completion_ms = 0.0;
};

/// Thrown by reverse() when the backend fails mid-run.
class ReversalAborted : public Error {
 public:
  ReversalAborted(const Error& cause, ReversalState partial);
  const ReversalState& partial() const noexcept { return partial_; }

 private:
  ReversalState partial_;
};

/// Mean token NLL (log-perplexity) of `ids`.
double autoreg_loss(const TokenSequence& ids, const Backend& backend);

/// User message for the defended request: prefix text, a space, request.
std::string defended_prompt(const ReversalState& state, const Backend& backend);

bool refusal_check(std::string_view text, const std::vector<std::string>& refusal_prefixes);

ReversalState initial_reversal_state(std::string_view request, const Backend& backend,
                                     const ReversalConfig& config);

std::vector<TokenId> propose_candidates(const ReversalState& state, const Backend& backend,
                                        const ReversalConfig& config);

ReversalState reversal_step(const ReversalState& state, const Backend& backend,
                            const ReversalConfig& config);

ReversalResult reverse(std::string_view request, const Backend& backend,
                       const ReversalConfig& config = {});

std::vector<std::string> load_refusal_prefixes(const std::string& path);

}  // namespace spin_guard
