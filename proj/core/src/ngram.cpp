#include "spin_guard/ngram.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "spin_guard/error.hpp"

namespace spin_guard {
namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& what) {
  fail(ErrorKind::MalformedModelFile, "line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

NGramModel::NGramModel(std::size_t order, double smoothing_k, WordTokenizer tokenizer)
    : order_(order), smoothing_k_(smoothing_k), tokenizer_(std::move(tokenizer)) {
  if (order_ < 1) fail(ErrorKind::InvalidArgument, "n-gram order must be at least 1");
  if (!(smoothing_k_ > 0.0) || !std::isfinite(smoothing_k_))
    fail(ErrorKind::InvalidArgument, "smoothing_k must be positive and finite");
}

std::vector<TokenId> NGramModel::context_key(std::span<const TokenId> history) const {
  const std::size_t n = order_ - 1;
  std::vector<TokenId> key(n, kBos);
  const std::size_t take = std::min(n, history.size());
  for (std::size_t i = 0; i < take; ++i) key[n - take + i] = history[history.size() - take + i];
  return key;
}

void NGramModel::add_count(std::vector<TokenId> context, TokenId next, double count) {
  if (context.size() != order_ - 1) fail(ErrorKind::InvalidArgument, "context length must equal order - 1");
  if (next >= vocab_size()) fail(ErrorKind::InvalidArgument, "next token outside vocabulary");
  if (!(count >= 0.0) || !std::isfinite(count)) fail(ErrorKind::InvalidArgument, "counts must be finite and non-negative");
  for (TokenId t : context)
    if (t != kBos && t >= vocab_size()) fail(ErrorKind::InvalidArgument, "context token outside vocabulary");
  auto& row = rows_[std::move(context)];
  row.next[next] += count;
  row.total += count;
}

void NGramModel::observe(std::span<const TokenId> ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) add_count(context_key(ids.first(i)), ids[i], 1.0);
}

std::vector<double> NGramModel::log_probs(std::span<const TokenId> history) const {
  const double v = static_cast<double>(vocab_size());
  const auto it = rows_.find(context_key(history));
  const double total = it == rows_.end() ? 0.0 : it->second.total;
  const double log_denom = std::log(total + smoothing_k_ * v);
  std::vector<double> out(vocab_size(), std::log(smoothing_k_) - log_denom);
  if (it != rows_.end())
    for (const auto& [tok, c] : it->second.next) out[tok] = std::log(c + smoothing_k_) - log_denom;
  return out;
}

double NGramModel::log_prob(std::span<const TokenId> history, TokenId next) const {
  if (next >= vocab_size()) fail(ErrorKind::InvalidArgument, "token outside vocabulary");
  const auto it = rows_.find(context_key(history));
  const double total = it == rows_.end() ? 0.0 : it->second.total;
  double c = 0.0;
  if (it != rows_.end())
    if (auto jt = it->second.next.find(next); jt != it->second.next.end()) c = jt->second;
  return std::log(c + smoothing_k_) - std::log(total + smoothing_k_ * static_cast<double>(vocab_size()));
}

NGramModel NGramModel::parse(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  };

  if (!next_line()) fail(ErrorKind::MalformedModelFile, "empty model file");
  const auto header = split_ws(line);
  if (header.size() < 3 || header.size() > 4 || header[0] != "ngram")
    malformed(line_no, "expected 'ngram <order> <smoothing_k> [bytes]'");
  std::size_t order = 0;
  double k = 0.0;
  try {
    std::size_t used = 0;
    const long long o = std::stoll(header[1], &used);
    if (used != header[1].size() || o < 1) malformed(line_no, "order must be a positive integer");
    order = static_cast<std::size_t>(o);
    k = std::stod(header[2], &used);
    if (used != header[2].size() || !(k > 0.0) || !std::isfinite(k)) malformed(line_no, "smoothing_k must be positive");
  } catch (const std::logic_error&) {
    malformed(line_no, "bad number in header");
  }
  bool bytes = false;
  if (header.size() == 4) {
    if (header[3] != "bytes") malformed(line_no, "unknown header flag '" + header[3] + "'");
    bytes = true;
  }

  if (!next_line()) malformed(line_no, "missing vocabulary line");
  auto vocab = split_ws(line);
  if (vocab.empty() && !bytes) malformed(line_no, "empty vocabulary");
  for (const auto& w : vocab)
    if (w == "<s>") malformed(line_no, "'<s>' is reserved for the begin marker");
  WordTokenizer tok = [&] {
    try {
      return WordTokenizer(vocab, bytes);
    } catch (const Error& e) {
      malformed(line_no, e.detail());
    }
  }();
  NGramModel model(order, k, std::move(tok));

  while (next_line()) {
    const auto fields = split_ws(line);
    if (fields.size() != order + 1)
      malformed(line_no, "expected " + std::to_string(order + 1) + " fields, got " + std::to_string(fields.size()));
    std::vector<TokenId> ctx;
    for (std::size_t i = 0; i + 1 < order; ++i) {
      if (fields[i] == "<s>") {
        ctx.push_back(kBos);
        continue;
      }
      const auto id = model.tokenizer_.find(fields[i]);
      if (!id) malformed(line_no, "unknown token '" + fields[i] + "'");
      ctx.push_back(*id);
    }
    const auto next = model.tokenizer_.find(fields[order - 1]);
    if (!next) malformed(line_no, "unknown token '" + fields[order - 1] + "'");
    double count = 0.0;
    try {
      std::size_t used = 0;
      count = std::stod(fields[order], &used);
      if (used != fields[order].size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      malformed(line_no, "bad count '" + fields[order] + "'");
    }
    if (!(count >= 0.0) || !std::isfinite(count)) malformed(line_no, "count must be non-negative");
    model.add_count(std::move(ctx), *next, count);
  }
  return model;
}

NGramModel NGramModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::FileNotFound, "cannot open n-gram model '" + path + "'");
  return parse(in);
}

void NGramModel::save(std::ostream& out) const {
  out << "ngram " << order_ << ' ' << std::setprecision(17) << smoothing_k_
      << (tokenizer_.byte_fallback() ? " bytes" : "") << '\n';
  for (std::size_t i = 0; i < tokenizer_.word_count(); ++i) out << (i ? " " : "") << tokenizer_.words()[i];
  out << '\n';
  for (const auto& [ctx, row] : rows_) {
    for (const auto& [tok, c] : row.next) {
      for (TokenId t : ctx) out << (t == kBos ? std::string("<s>") : tokenizer_.name(t)) << ' ';
      out << tokenizer_.name(tok) << ' ' << c << '\n';
    }
  }
}

NGramBackend::NGramBackend(NGramModel model, std::size_t context_length)
    : model_(std::move(model)), context_length_(context_length) {}

TokenSequence NGramBackend::tokenize(std::string_view text) const {
  return TokenSequence{model_.tokenizer().encode(text), std::string(text)};
}

std::string NGramBackend::detokenize(std::span<const TokenId> ids) const {
  return model_.tokenizer().decode(ids);
}

LogitVector NGramBackend::next_token_logits(const TokenSequence& context) const {
  return LogitVector{model_.log_probs(context.ids)};
}

Generation NGramBackend::generate(std::string_view prompt, const DecodeParams& params) const {
  if (params.temperature < 0.0 || !std::isfinite(params.temperature))
    fail(ErrorKind::InvalidArgument, "temperature must be finite and non-negative");
  std::vector<TokenId> history = tokenize(render_prompt(prompt)).ids;
  if (history.size() + params.max_new_tokens > context_length_)
    fail(ErrorKind::ContextLengthExceeded, std::to_string(history.size()) + " prompt tokens + " +
                                               std::to_string(params.max_new_tokens) + " new tokens exceed " +
                                               std::to_string(context_length_));
  const std::size_t start = history.size();
  std::mt19937_64 rng(params.seed);
  for (std::size_t i = 0; i < params.max_new_tokens; ++i) {
    LogitVector logits{model_.log_probs(history)};
    TokenId next = 0;
    if (params.temperature == 0.0) {
      next = argmax(logits);
    } else {
      for (double& v : logits.values) v /= params.temperature;
      const auto p = softmax(logits.values);
      std::discrete_distribution<TokenId> dist(p.begin(), p.end());
      next = dist(rng);
    }
    history.push_back(next);
  }
  Generation g;
  g.tokens = from_ids(std::vector<TokenId>(history.begin() + static_cast<std::ptrdiff_t>(start), history.end()));
  g.text = g.tokens.text;
  return g;
}

std::vector<double> NGramBackend::sequence_nll(const TokenSequence& ids) const {
  if (ids.empty()) fail(ErrorKind::InvalidArgument, "sequence_nll needs at least one token");
  std::vector<double> out(ids.size());
  const std::span<const TokenId> all(ids.ids);
  for (std::size_t i = 0; i < ids.size(); ++i) out[i] = -model_.log_prob(all.first(i), ids.ids[i]);
  return out;
}

}  // namespace spin_guard
