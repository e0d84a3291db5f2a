#include "spin_guard/search.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "spin_guard/error.hpp"

namespace spin_guard {

std::string_view to_string(ProposerStrategy s) { return s == ProposerStrategy::LogitProxy ? "logit_proxy" : "random"; }

std::optional<ProposerStrategy> parse_proposer(std::string_view s) {
  if (s == "logit_proxy") return ProposerStrategy::LogitProxy;
  if (s == "random") return ProposerStrategy::Random;
  return std::nullopt;
}

std::mt19937_64 step_rng(std::uint64_t seed, std::uint64_t step, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::vector<TokenId> propose_token_candidates(const Backend& backend, std::span<const TokenId> lead,
                                              std::span<const TokenId> span, ProposerStrategy strategy,
                                              std::size_t k, std::mt19937_64& rng) {
  const std::size_t vocab = backend.vocab_size();
  k = std::min(k, vocab);
  if (k == 0) return {};

  if (strategy == ProposerStrategy::Random) {
    std::vector<TokenId> ids(vocab);
    std::iota(ids.begin(), ids.end(), TokenId{0});
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, vocab - 1);
      std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(k);
    return ids;
  }

  std::size_t slot = 0;
  if (!span.empty()) slot = std::uniform_int_distribution<std::size_t>(0, span.size() - 1)(rng);
  std::vector<TokenId> context(lead.begin(), lead.end());
  context.insert(context.end(), span.begin(), span.begin() + static_cast<std::ptrdiff_t>(slot));
  return top_k(backend.next_token_logits(backend.from_ids(std::move(context))), k);
}

SubstitutionStep substitution_step(std::span<const TokenId> current, double current_loss,
                                   std::span<const TokenId> candidates, std::size_t batch_size,
                                   std::mt19937_64& rng, const SpanObjective& objective) {
  SubstitutionStep out;
  out.ids.assign(current.begin(), current.end());
  out.loss = current_loss;
  if (current.empty() || candidates.empty() || batch_size == 0) return out;

  std::vector<Substitution> draws;
  const std::size_t space = current.size() * candidates.size();
  if (batch_size >= space) {
    draws.reserve(space);
    for (std::size_t p = 0; p < current.size(); ++p)
      for (TokenId t : candidates) draws.push_back({p, t});
  } else {
    std::uniform_int_distribution<std::size_t> pos(0, current.size() - 1);
    std::uniform_int_distribution<std::size_t> tok(0, candidates.size() - 1);
    draws.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
      const std::size_t p = pos(rng);
      draws.push_back({p, candidates[tok(rng)]});
    }
  }

  std::map<std::pair<std::size_t, TokenId>, double> seen;
  std::vector<TokenId> variant(current.begin(), current.end());
  double best_loss = std::numeric_limits<double>::infinity();
  std::optional<Substitution> best;
  for (const auto& d : draws) {
    const auto key = std::make_pair(d.position, d.token);
    auto it = seen.find(key);
    if (it == seen.end()) {
      double loss = current_loss;
      if (current[d.position] != d.token) {
        variant[d.position] = d.token;
        loss = objective(variant);
        variant[d.position] = current[d.position];
        ++out.evaluated;
        if (std::isnan(loss)) loss = std::numeric_limits<double>::infinity();
      }
      it = seen.emplace(key, loss).first;
    }
    const double loss = it->second;
    const bool better =
        !best || loss < best_loss ||
        (loss == best_loss && (d.token < best->token || (d.token == best->token && d.position < best->position)));
    if (better) {
      best_loss = loss;
      best = d;
    }
  }

  out.best = best;
  if (best && best_loss < current_loss) {
    out.ids[best->position] = best->token;
    out.loss = best_loss;
    out.improved = true;
  }
  return out;
}

}  // namespace spin_guard
