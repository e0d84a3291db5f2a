#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spin_guard/tokens.hpp"

namespace spin_guard {

/**
 * Whitespace-delimited word tokenizer used by the toy backends.
 *
 * Ids [0, |words|) are whole words. With byte fallback enabled, ids
 * [|words|, |words| + 256) are raw bytes and cover any input.
 *
 * A single space between two word tokens is implicit and never produces a
 * token, so "! ! ! ! !" is five tokens. Every other whitespace run, and any
 * word missing from the table, is emitted as byte tokens (or rejected
 * without fallback). decode(encode(s)) == s for every accepted string.
 */
class WordTokenizer {
 public:
  static constexpr std::size_t kByteTokens = 256;

  WordTokenizer() = default;
  WordTokenizer(std::vector<std::string> words, bool byte_fallback);

  std::size_t size() const noexcept;
  std::size_t word_count() const noexcept { return words_.size(); }
  bool byte_fallback() const noexcept { return byte_fallback_; }

  bool is_byte(TokenId id) const noexcept { return id >= words_.size(); }
  std::optional<TokenId> find(std::string_view piece) const;

  /// Surface text of a token ("<0x21>" style for byte tokens is accepted by
  /// find() but piece() returns the raw byte).
  std::string piece(TokenId id) const;
  /// Printable name: the word, or "<0xNN>" for byte tokens.
  std::string name(TokenId id) const;

  /// Throws Error{UnsupportedCharacter} when the text cannot be encoded.
  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> ids) const;

  const std::vector<std::string>& words() const noexcept { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
  bool byte_fallback_ = false;
};

}  // namespace spin_guard
