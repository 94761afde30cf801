#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cverepair::metric {

enum class TokenKind { Keyword, Identifier, Literal, Punctuation };

// Lexed view of a C snippet. tokens and kinds are parallel arrays.
struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<TokenKind> kinds;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

// Total lexer for C source text. Comments count as whitespace (each comment
// is one separator, as in the C translation phases). String and character
// literals are single Literal tokens. Multi-character operators are lexed
// longest-first. Any byte that fits no rule becomes a one-character
// Punctuation token, so lexing never fails.
TokenSequence tokenize_code(std::string_view source);

bool is_c_keyword(std::string_view word);
const std::vector<std::string>& c_keywords();

const char* token_kind_name(TokenKind kind);

namespace detail {

// Parser-facing token: same lexing rules as tokenize_code, plus optional
// folding of whole preprocessor directives (a '#' first on its line up to
// the unescaped end of line) into single tokens.
struct RawToken {
  std::string text;
  TokenKind kind;
  bool preproc = false;
};

std::vector<RawToken> lex_raw(std::string_view source, bool fold_preproc);

}  // namespace detail

}  // namespace cverepair::metric
