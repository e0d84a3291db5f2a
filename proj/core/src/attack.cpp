#include "spin_guard/attack.hpp"

#include <cmath>
#include <functional>

#include "spin_guard/error.hpp"

namespace spin_guard {

void AttackConfig::validate() const {
  if (target.empty()) fail(ErrorKind::ConfigError, "attack.target must not be empty");
  if (batch_size < 1) fail(ErrorKind::ConfigError, "attack.batch_size must be >= 1");
  if (candidate_k < 1) fail(ErrorKind::ConfigError, "attack.candidate_k must be >= 1");
  if (max_new_tokens < 1) fail(ErrorKind::ConfigError, "attack.max_new_tokens must be >= 1");
}

void Lambdas::validate() const {
  for (double v : {repeat, interject, autoreg})
    if (!std::isfinite(v) || v < 0.0) fail(ErrorKind::ConfigError, "lambdas must be finite and >= 0");
}

double combine(const LossBreakdown& t, const Lambdas& l) {
  return t.attack + l.repeat * t.repeat + l.interject * t.interject + l.autoreg * t.autoreg;
}

AttackAborted::AttackAborted(const Error& cause, AttackState partial) : Error(cause), partial_(std::move(partial)) {}

AlternationAborted::AlternationAborted(const Error& cause, std::vector<AlternationRound> transcript)
    : Error(cause), transcript_(std::move(transcript)) {}

std::string attacked_prompt(std::string_view request, const TokenSequence& suffix, const Backend& backend) {
  const std::string s = suffix.text.empty() && !suffix.empty() ? backend.detokenize(suffix.ids) : suffix.text;
  if (s.empty()) return std::string(request);
  return std::string(request) + " " + s;
}

double attack_loss(std::string_view request, const TokenSequence& suffix, std::string_view target,
                   const Backend& backend) {
  const auto target_ids = backend.tokenize(target);
  if (target_ids.empty()) fail(ErrorKind::InvalidArgument, "attack target tokenizes to nothing");
  std::vector<TokenId> context = backend.tokenize(backend.render_prompt(attacked_prompt(request, suffix, backend))).ids;
  double total = 0.0;
  for (TokenId t : target_ids.ids) {
    total += token_nll(backend.next_token_logits(backend.from_ids(context)), t);
    context.push_back(t);
  }
  return total / static_cast<double>(target_ids.size());
}

LossBreakdown adaptive_loss(std::string_view request, const TokenSequence& suffix, std::string_view target,
                            const Lambdas& lambdas, const Backend& backend, const DetectionConfig& detection) {
  lambdas.validate();
  const std::string attacked = attacked_prompt(request, suffix, backend);
  LossBreakdown b;
  b.attack = attack_loss(request, suffix, target, backend);
  b.repeat = repeat_loss(attacked, backend, detection);
  b.interject = interjection_loss(attacked, backend, detection);
  b.autoreg = autoreg_loss(backend.tokenize(attacked), backend);
  b.combined = combine(b, lambdas);
  return b;
}

namespace {

struct SearchHooks {
  // Search objective; must equal breakdown(...).combined bit for bit.
  std::function<double(const TokenSequence&)> objective;
  std::function<LossBreakdown(const TokenSequence&)> breakdown;
};

AttackState run_search(std::string_view request, const Backend& backend, const AttackConfig& config,
                       const SearchHooks& hooks) {
  config.validate();
  AttackState state;
  const DecodeParams params{config.max_new_tokens, 0.0, config.seed};
  auto check = [&] {
    state.completion = backend.generate(attacked_prompt(request, state.suffix, backend), params).text;
    state.success = !refusal_check(state.completion, config.refusal_prefixes);
  };

  try {
    state.suffix = backend.tokenize(config.suffix_init);
    state.losses = hooks.breakdown(state.suffix);
    check();
    state.trace.push_back({0, state.losses, state.success});

    const auto lead = backend.tokenize(request).ids;
    for (std::size_t it = 1; it <= config.max_iters; ++it) {
      if (state.success && config.early_stop) break;
      auto rng = step_rng(config.seed, it - 1, 2);
      const auto candidates =
          propose_token_candidates(backend, lead, state.suffix.ids, config.proposer, config.candidate_k, rng);
      auto batch_rng = step_rng(config.seed, it - 1, 3);
      const auto step = substitution_step(
          state.suffix.ids, state.losses.combined, candidates, config.batch_size, batch_rng,
          [&](std::span<const TokenId> ids) {
            return hooks.objective(backend.from_ids(std::vector<TokenId>(ids.begin(), ids.end())));
          });
      if (step.improved) {
        state.suffix = backend.from_ids(step.ids);
        state.losses = hooks.breakdown(state.suffix);
        check();
      }
      state.iteration = it;
      state.trace.push_back({it, state.losses, state.success});
    }
  } catch (const Error& e) {
    throw AttackAborted(e, state);
  }
  return state;
}

}  // namespace

AttackState suffix_attack(std::string_view request, const Backend& backend, const AttackConfig& config) {
  SearchHooks hooks;
  hooks.objective = [&](const TokenSequence& s) { return attack_loss(request, s, config.target, backend); };
  hooks.breakdown = [&](const TokenSequence& s) {
    LossBreakdown b;
    b.attack = attack_loss(request, s, config.target, backend);
    b.combined = b.attack;
    return b;
  };
  return run_search(request, backend, config, hooks);
}

AttackState adaptive_attack(std::string_view request, const Backend& backend, const AttackConfig& config,
                            const Lambdas& lambdas, const DetectionConfig& detection) {
  lambdas.validate();
  SearchHooks hooks;
  // Terms with a zero weight contribute exactly 0 and are not evaluated.
  hooks.objective = [&](const TokenSequence& s) {
    LossBreakdown b;
    b.attack = attack_loss(request, s, config.target, backend);
    const std::string attacked = attacked_prompt(request, s, backend);
    if (lambdas.repeat != 0.0) b.repeat = repeat_loss(attacked, backend, detection);
    if (lambdas.interject != 0.0) b.interject = interjection_loss(attacked, backend, detection);
    if (lambdas.autoreg != 0.0) b.autoreg = autoreg_loss(backend.tokenize(attacked), backend);
    return combine(b, lambdas);
  };
  hooks.breakdown = [&](const TokenSequence& s) {
    return adaptive_loss(request, s, config.target, lambdas, backend, detection);
  };
  return run_search(request, backend, config, hooks);
}

AlternationResult alternating_attack_defense(std::string_view request, const Backend& backend,
                                             const AttackConfig& attack, const ReversalConfig& reversal,
                                             const AlternationConfig& alternation) {
  if (alternation.rounds < 1) fail(ErrorKind::InvalidArgument, "alternation needs at least one round");
  AlternationResult result;
  std::string suffix = attack.suffix_init;
  std::string defense;
  try {
    for (std::size_t r = 1; r <= alternation.rounds; ++r) {
      AttackConfig ac = attack;
      ac.suffix_init = suffix;
      ac.seed = attack.seed + (r - 1);
      const std::string attacked_request = defense.empty() ? std::string(request) : defense + " " + std::string(request);
      const auto st = suffix_attack(attacked_request, backend, ac);
      suffix = st.suffix.text;

      ReversalConfig rc = reversal;
      if (alternation.persist_defense && !defense.empty()) rc.init_prefix = defense;
      const auto rev = reverse(attacked_prompt(request, st.suffix, backend), backend, rc);
      defense = rev.final_prefix;

      AlternationRound round;
      round.round = r;
      round.attack_initial = st.trace.front().losses.attack;
      round.attack_final = st.losses.attack;
      round.defense_initial = rev.state.loss_trace.front();
      round.defense_final = rev.state.best_loss;
      round.suffix = suffix;
      round.defense_prefix = defense;
      round.defense_outcome = rev.outcome;
      result.transcript.push_back(round);

      if (round.attack_initial - round.attack_final <= alternation.epsilon &&
          round.defense_initial - round.defense_final <= alternation.epsilon) {
        result.converged = true;
        break;
      }
    }
  } catch (const Error& e) {
    throw AlternationAborted(e, result.transcript);
  }
  result.suffix = suffix;
  result.defense_prefix = defense;
  return result;
}

}  // namespace spin_guard
