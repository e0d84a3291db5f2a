#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace spin_guard {

using TokenId = std::uint32_t;

/// Token ids plus the surface string they detokenize to.
struct TokenSequence {
  std::vector<TokenId> ids;
  std::string text;

  std::size_t size() const noexcept { return ids.size(); }
  bool empty() const noexcept { return ids.empty(); }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Full-vocabulary next-token scores. Only finite values cross the backend
/// boundary.
struct LogitVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

/// Numerically stable log-softmax.
std::vector<double> log_softmax(std::span<const double> logits);
std::vector<double> softmax(std::span<const double> logits);

/// -ln softmax(logits)[id].
double token_nll(const LogitVector& logits, TokenId id);

/// Ids of the `k` largest logits, ties broken toward the lower id.
std::vector<TokenId> top_k(const LogitVector& logits, std::size_t k);

TokenId argmax(const LogitVector& logits);

double mean(std::span<const double> values);

}  // namespace spin_guard
