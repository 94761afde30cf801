#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace cverepair {

// Approximate sub-word token counting, used everywhere a context budget is
// enforced (corpus filtering, prompt budgets, chat session accounting).
//
// Schemes:
//   "builtin" — the text is segmented into maximal runs of identifier
//               characters ([A-Za-z0-9_]), maximal whitespace runs, and
//               single punctuation bytes; each run counts ceil(len/4)
//               pieces. Long identifiers therefore split into several
//               tokens, the way LLM byte-pair vocabularies split them.
//   "bytes"   — ceil(byte_length/4).
//
// Both schemes are deterministic and monotone under concatenation:
// count(a+b) >= max(count(a), count(b)). For "builtin" this holds because
// concatenation can only merge the run at the seam, and ceil(len/4) of a
// merged run is never smaller than either side's contribution for that run.
class TokenCounter {
public:
  // Throws TokenizerError for an unknown scheme id.
  explicit TokenCounter(std::string scheme = "builtin");

  std::size_t count(std::string_view text) const;

  const std::string& scheme() const { return scheme_; }

  static bool is_known_scheme(std::string_view scheme);

private:
  std::string scheme_;
};

// One-shot convenience wrapper.
std::size_t count_tokens(std::string_view text, const std::string& scheme = "builtin");

}  // namespace cverepair
