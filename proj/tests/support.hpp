#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include <unistd.h>

#include "spin_guard/backend.hpp"
#include "spin_guard/config.hpp"
#include "spin_guard/error.hpp"
#include "spin_guard/ngram.hpp"
#include "spin_guard/scripted.hpp"

namespace testing {

inline std::string data(const std::string& name) { return std::string(SPIN_GUARD_TEST_DATA) + "/" + name; }

inline spin_guard::ScriptedBackend echo_backend() { return spin_guard::ScriptedBackend::load(data("echo_model.json")); }

inline spin_guard::NGramBackend ngram_backend() {
  return spin_guard::NGramBackend(spin_guard::NGramModel::load(data("ngram_small.txt")));
}

// Kind of the spin_guard::Error thrown by f; fails the test if none is.
inline spin_guard::ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const spin_guard::Error& e) {
    return e.kind();
  }
  throw std::logic_error("expected a spin_guard::Error");
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("spin_guard_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Passes everything through to `inner` and throws once `budget` calls have
// been made, to exercise mid-run backend failures.
class FailingBackend final : public spin_guard::Backend {
 public:
  FailingBackend(const spin_guard::Backend& inner, int budget) : inner_(inner), budget_(budget) {
    set_chat_template(inner.chat_template());
  }
  std::size_t vocab_size() const override { return inner_.vocab_size(); }
  spin_guard::TokenSequence tokenize(std::string_view t) const override { return inner_.tokenize(t); }
  std::string detokenize(std::span<const spin_guard::TokenId> ids) const override { return inner_.detokenize(ids); }
  spin_guard::LogitVector next_token_logits(const spin_guard::TokenSequence& c) const override {
    spend();
    return inner_.next_token_logits(c);
  }
  spin_guard::Generation generate(std::string_view p, const spin_guard::DecodeParams& d) const override {
    spend();
    return inner_.generate(p, d);
  }
  std::vector<double> sequence_nll(const spin_guard::TokenSequence& ids) const override {
    spend();
    return inner_.sequence_nll(ids);
  }

 private:
  void spend() const {
    if (budget_-- <= 0) spin_guard::fail(spin_guard::ErrorKind::BackendUnavailable, "injected failure");
  }
  const spin_guard::Backend& inner_;
  mutable std::atomic<int> budget_;
};

}  // namespace testing
