#include "spin_guard/tokens.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spin_guard/error.hpp"

namespace spin_guard {

std::vector<double> log_softmax(std::span<const double> logits) {
  if (logits.empty()) fail(ErrorKind::InvalidArgument, "log_softmax of an empty vector");
  const double hi = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - hi);
  const double log_z = hi + std::log(sum);
  std::vector<double> out(logits.size());
  std::transform(logits.begin(), logits.end(), out.begin(), [&](double v) { return v - log_z; });
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  for (double& v : out) v = std::exp(v);
  return out;
}

double token_nll(const LogitVector& logits, TokenId id) {
  if (id >= logits.size()) fail(ErrorKind::InvalidArgument, "token id outside logit vector");
  const auto& v = logits.values;
  const double hi = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - hi);
  return hi + std::log(sum) - v[id];
}

std::vector<TokenId> top_k(const LogitVector& logits, std::size_t k) {
  std::vector<TokenId> ids(logits.size());
  std::iota(ids.begin(), ids.end(), TokenId{0});
  k = std::min(k, ids.size());
  const auto& v = logits.values;
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    [&](TokenId a, TokenId b) { return v[a] != v[b] ? v[a] > v[b] : a < b; });
  ids.resize(k);
  return ids;
}

TokenId argmax(const LogitVector& logits) {
  if (logits.values.empty()) fail(ErrorKind::InvalidArgument, "argmax of an empty vector");
  // max_element returns the first maximum, i.e. the lowest id on ties
  return static_cast<TokenId>(std::max_element(logits.values.begin(), logits.values.end()) -
                              logits.values.begin());
}

double mean(std::span<const double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

}  // namespace spin_guard
