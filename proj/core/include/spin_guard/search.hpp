#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "spin_guard/backend.hpp"

namespace spin_guard {

enum class ProposerStrategy { LogitProxy, Random };

std::string_view to_string(ProposerStrategy s);
std::optional<ProposerStrategy> parse_proposer(std::string_view s);

/// Generator for one search step; a pure function of (seed, step, stream).
std::mt19937_64 step_rng(std::uint64_t seed, std::uint64_t step, std::uint64_t stream);

/**
 * Candidate replacement tokens for a slot in `span`.
 *
 * LogitProxy picks a slot uniformly and ranks the vocabulary by the
 * backend's next-token logits after `lead` + span[0..slot). Random samples
 * k tokens without replacement. k is clamped to the vocabulary size.
 */
std::vector<TokenId> propose_token_candidates(const Backend& backend,
                                              std::span<const TokenId> lead,
                                              std::span<const TokenId> span,
                                              ProposerStrategy strategy, std::size_t k,
                                              std::mt19937_64& rng);

struct Substitution {
  std::size_t position = 0;
  TokenId token = 0;
};

struct SubstitutionStep {
  std::vector<TokenId> ids;
  double loss = 0.0;
  bool improved = false;
  std::optional<Substitution> best;  // batch winner, adopted or not
  std::size_t evaluated = 0;
};

using SpanObjective = std::function<double(std::span<const TokenId>)>;

/**
 * One greedy coordinate step over `current`. Draws `batch_size` single
 * substitutions (slot uniform, token uniform over `candidates`) and keeps
 * the lowest-loss variant only if it is strictly below `current_loss`.
 * Ties prefer the lower token id, then the lower position. When the batch
 * can cover every (slot, candidate) pair it enumerates them instead.
 */
SubstitutionStep substitution_step(std::span<const TokenId> current, double current_loss,
                                   std::span<const TokenId> candidates,
                                   std::size_t batch_size, std::mt19937_64& rng,
                                   const SpanObjective& objective);

}  // namespace spin_guard
