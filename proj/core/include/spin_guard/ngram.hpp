#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "spin_guard/backend.hpp"
#include "spin_guard/tokenizer.hpp"

namespace spin_guard {

/**
 * Add-k smoothed n-gram model over a fixed word vocabulary.
 *
 * Contexts shorter than order-1 are left-padded with a begin-of-sequence
 * marker that is never predicted, so the first token of any sequence is
 * scored against the BOS context.
 *
 * File format:
 *   ngram <order> <smoothing_k> [bytes]
 *   <vocab tokens, space separated>
 *   <ctx_1> ... <ctx_{order-1}> <next> <count>
 * `<s>` denotes BOS in a context slot; byte tokens are written `<0xNN>`.
 */
class NGramModel {
 public:
  static constexpr TokenId kBos = 0xFFFFFFFFu;

  NGramModel(std::size_t order, double smoothing_k, WordTokenizer tokenizer);

  std::size_t order() const noexcept { return order_; }
  double smoothing_k() const noexcept { return smoothing_k_; }
  const WordTokenizer& tokenizer() const noexcept { return tokenizer_; }
  std::size_t vocab_size() const noexcept { return tokenizer_.size(); }

  void add_count(std::vector<TokenId> context, TokenId next, double count);
  /// Counts every n-gram of the sequence, BOS-padded on the left.
  void observe(std::span<const TokenId> ids);

  /// Log-probabilities of every token given the trailing order-1 ids of
  /// `history` (BOS-padded).
  std::vector<double> log_probs(std::span<const TokenId> history) const;
  double log_prob(std::span<const TokenId> history, TokenId next) const;

  static NGramModel parse(std::istream& in);
  static NGramModel load(const std::string& path);
  void save(std::ostream& out) const;

 private:
  struct Row {
    std::map<TokenId, double> next;
    double total = 0.0;
  };
  std::vector<TokenId> context_key(std::span<const TokenId> history) const;

  std::size_t order_;
  double smoothing_k_;
  WordTokenizer tokenizer_;
  std::map<std::vector<TokenId>, Row> rows_;
};

class NGramBackend final : public Backend {
 public:
  explicit NGramBackend(NGramModel model, std::size_t context_length = 4096);

  const NGramModel& model() const noexcept { return model_; }

  std::size_t vocab_size() const override { return model_.vocab_size(); }
  TokenSequence tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const TokenId> ids) const override;
  LogitVector next_token_logits(const TokenSequence& context) const override;
  Generation generate(std::string_view prompt, const DecodeParams& params) const override;
  std::vector<double> sequence_nll(const TokenSequence& ids) const override;

 private:
  NGramModel model_;
  std::size_t context_length_;
};

}  // namespace spin_guard
