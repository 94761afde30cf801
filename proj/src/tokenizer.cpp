#include "cverepair/tokenizer.hpp"

#include <cctype>

#include "cverepair/errors.hpp"

namespace cverepair {
namespace {

enum class RunClass { Ident, Space, Punct };

RunClass classify(unsigned char c) {
  if (std::isalnum(c) || c == '_') return RunClass::Ident;
  if (std::isspace(c)) return RunClass::Space;
  return RunClass::Punct;
}

std::size_t pieces(std::size_t run_len) { return (run_len + 3) / 4; }

std::size_t count_builtin(std::string_view text) {
  std::size_t total = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const RunClass cls = classify(static_cast<unsigned char>(text[i]));
    if (cls == RunClass::Punct) {
      // Punctuation bytes never merge into runs.
      ++total;
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && classify(static_cast<unsigned char>(text[j])) == cls) ++j;
    total += pieces(j - i);
    i = j;
  }
  return total;
}

}  // namespace

TokenCounter::TokenCounter(std::string scheme) : scheme_(std::move(scheme)) {
  if (!is_known_scheme(scheme_)) {
    throw TokenizerError("unknown tokenizer scheme: " + scheme_);
  }
}

bool TokenCounter::is_known_scheme(std::string_view scheme) {
  return scheme == "builtin" || scheme == "bytes";
}

std::size_t TokenCounter::count(std::string_view text) const {
  if (scheme_ == "bytes") return (text.size() + 3) / 4;
  return count_builtin(text);
}

std::size_t count_tokens(std::string_view text, const std::string& scheme) {
  return TokenCounter(scheme).count(text);
}

}  // namespace cverepair
