#include "spin_guard/tokenizer.hpp"

#include <cstdio>

#include "spin_guard/error.hpp"

namespace spin_guard {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::optional<unsigned> parse_byte_name(std::string_view piece) {
  // <0xNN>
  if (piece.size() != 6 || piece.substr(0, 3) != "<0x" || piece.back() != '>') return std::nullopt;
  unsigned value = 0;
  for (char c : piece.substr(3, 2)) {
    value <<= 4;
    if (c >= '0' && c <= '9') value |= static_cast<unsigned>(c - '0');
    else if (c >= 'A' && c <= 'F') value |= static_cast<unsigned>(c - 'A' + 10);
    else if (c >= 'a' && c <= 'f') value |= static_cast<unsigned>(c - 'a' + 10);
    else return std::nullopt;
  }
  return value;
}

}  // namespace

WordTokenizer::WordTokenizer(std::vector<std::string> words, bool byte_fallback)
    : words_(std::move(words)), byte_fallback_(byte_fallback) {
  if (words_.empty() && !byte_fallback_)
    fail(ErrorKind::InvalidArgument, "tokenizer needs at least one word or byte fallback");
  for (std::size_t i = 0; i < words_.size(); ++i) {
    const auto& w = words_[i];
    if (w.empty()) fail(ErrorKind::InvalidArgument, "empty vocabulary entry");
    for (char c : w)
      if (is_space(c)) fail(ErrorKind::InvalidArgument, "vocabulary entry contains whitespace: '" + w + "'");
    if (!index_.emplace(w, static_cast<TokenId>(i)).second)
      fail(ErrorKind::InvalidArgument, "duplicate vocabulary entry '" + w + "'");
  }
}

std::size_t WordTokenizer::size() const noexcept {
  return words_.size() + (byte_fallback_ ? kByteTokens : 0);
}

std::optional<TokenId> WordTokenizer::find(std::string_view piece) const {
  if (auto it = index_.find(std::string(piece)); it != index_.end()) return it->second;
  if (byte_fallback_) {
    if (auto b = parse_byte_name(piece)) return static_cast<TokenId>(words_.size() + *b);
  }
  return std::nullopt;
}

std::string WordTokenizer::piece(TokenId id) const {
  if (id < words_.size()) return words_[id];
  if (id < size()) return std::string(1, static_cast<char>(id - words_.size()));
  fail(ErrorKind::InvalidArgument, "token id " + std::to_string(id) + " outside vocabulary");
}

std::string WordTokenizer::name(TokenId id) const {
  if (id < words_.size()) return words_[id];
  if (id < size()) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "<0x%02X>", static_cast<unsigned>(id - words_.size()));
    return buf;
  }
  fail(ErrorKind::InvalidArgument, "token id " + std::to_string(id) + " outside vocabulary");
}

std::vector<TokenId> WordTokenizer::encode(std::string_view text) const {
  struct Run {
    std::string_view s;
    bool space;
  };
  std::vector<Run> runs;
  for (std::size_t i = 0; i < text.size();) {
    const bool sp = is_space(text[i]);
    std::size_t j = i;
    while (j < text.size() && is_space(text[j]) == sp) ++j;
    runs.push_back({text.substr(i, j - i), sp});
    i = j;
  }

  std::vector<std::optional<TokenId>> word_ids(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (runs[r].space) continue;
    if (auto it = index_.find(std::string(runs[r].s)); it != index_.end()) word_ids[r] = it->second;
  }

  std::vector<TokenId> ids;
  auto emit_bytes = [&](std::string_view s, std::size_t offset) {
    if (!byte_fallback_)
      fail(ErrorKind::UnsupportedCharacter,
           "cannot encode '" + std::string(s) + "' at byte " + std::to_string(offset));
    for (char c : s)
      ids.push_back(static_cast<TokenId>(words_.size() + static_cast<unsigned char>(c)));
  };

  std::size_t offset = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    if (!run.space) {
      if (word_ids[r]) ids.push_back(*word_ids[r]);
      else emit_bytes(run.s, offset);
    } else {
      const bool implicit = run.s == " " && r > 0 && r + 1 < runs.size() && word_ids[r - 1] &&
                            word_ids[r + 1];
      if (!implicit) emit_bytes(run.s, offset);
    }
    offset += run.s.size();
  }
  return ids;
}

std::string WordTokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  bool prev_word = false;
  for (TokenId id : ids) {
    if (id >= size()) fail(ErrorKind::InvalidArgument, "token id " + std::to_string(id) + " outside vocabulary");
    const bool word = id < words_.size();
    if (word && prev_word) out.push_back(' ');
    if (word) out += words_[id];
    else out.push_back(static_cast<char>(id - words_.size()));
    prev_word = word;
  }
  return out;
}

}  // namespace spin_guard
