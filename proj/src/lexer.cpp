#include "cverepair/lexer.hpp"

#include <cctype>
#include <unordered_set>

namespace cverepair::metric {
namespace {

const std::vector<std::string>& keyword_list() {
  static const std::vector<std::string> kws = {
      "auto",       "break",     "case",           "char",          "const",
      "continue",   "default",   "do",             "double",        "else",
      "enum",       "extern",    "float",          "for",           "goto",
      "if",         "inline",    "int",            "long",          "register",
      "restrict",   "return",    "short",          "signed",        "sizeof",
      "static",     "struct",    "switch",         "typedef",       "union",
      "unsigned",   "void",      "volatile",       "while",         "_Alignas",
      "_Alignof",   "_Atomic",   "_Bool",          "_Complex",      "_Generic",
      "_Imaginary", "_Noreturn", "_Static_assert", "_Thread_local",
  };
  return kws;
}

const std::unordered_set<std::string_view>& keyword_set() {
  static const std::unordered_set<std::string_view> kws(keyword_list().begin(),
                                                        keyword_list().end());
  return kws;
}

// Multi-character operators, longest first.
const std::vector<std::string_view>& multi_char_operators() {
  static const std::vector<std::string_view> ops = {
      "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=",
      "==",  "!=",  "&&",  "||", "+=", "-=", "*=", "/=", "%=", "&=",
      "^=",  "|=",  "##",
  };
  return ops;
}

bool is_ident_start(unsigned char c) { return std::isalpha(c) || c == '_'; }
bool is_ident_char(unsigned char c) { return std::isalnum(c) || c == '_'; }
bool is_digit(unsigned char c) { return std::isdigit(c) != 0; }

class Lexer {
public:
  Lexer(std::string_view src, bool fold_preproc) : src_(src), fold_preproc_(fold_preproc) {}

  std::vector<detail::RawToken> run() {
    std::vector<detail::RawToken> out;
    while (pos_ < src_.size()) {
      if (skip_whitespace_and_comments()) continue;
      if (fold_preproc_ && src_[pos_] == '#' && at_line_start_) {
        lex_directive(out);
        continue;
      }
      lex_token(out);
    }
    return out;
  }

private:
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  bool skip_whitespace_and_comments() {
    const std::size_t start = pos_;
    while (pos_ < src_.size()) {
      const unsigned char c = static_cast<unsigned char>(src_[pos_]);
      if (std::isspace(c)) {
        if (c == '\n') at_line_start_ = true;
        ++pos_;
      } else if (c == '/' && peek(1) == '/') {
        pos_ += 2;
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else if (c == '/' && peek(1) == '*') {
        pos_ += 2;
        while (pos_ < src_.size() && !(src_[pos_] == '*' && peek(1) == '/')) ++pos_;
        if (pos_ < src_.size()) pos_ += 2;
      } else {
        break;
      }
    }
    return pos_ != start;
  }

  void emit(std::vector<detail::RawToken>& out, std::size_t begin, TokenKind kind) {
    out.push_back({std::string(src_.substr(begin, pos_ - begin)), kind, false});
    at_line_start_ = false;
  }

  // Whole directive up to an unescaped end of line, '#' included.
  void lex_directive(std::vector<detail::RawToken>& out) {
    const std::size_t begin = pos_;
    while (pos_ < src_.size()) {
      if (src_[pos_] == '\\' && (peek(1) == '\n' || (peek(1) == '\r' && peek(2) == '\n'))) {
        pos_ += peek(1) == '\r' ? 3 : 2;
        continue;
      }
      if (src_[pos_] == '\n') break;
      ++pos_;
    }
    out.push_back({std::string(src_.substr(begin, pos_ - begin)), TokenKind::Punctuation, true});
    // pos_ rests on the newline; whitespace skipping re-arms at_line_start_.
  }

  void lex_token(std::vector<detail::RawToken>& out) {
    const std::size_t begin = pos_;
    const unsigned char c = static_cast<unsigned char>(src_[pos_]);

    if (is_ident_start(c)) {
      std::size_t j = pos_;
      while (j < src_.size() && is_ident_char(static_cast<unsigned char>(src_[j]))) ++j;
      const std::string_view word = src_.substr(pos_, j - pos_);
      if (j < src_.size() && (src_[j] == '"' || src_[j] == '\'') &&
          (word == "L" || word == "u" || word == "U" || word == "u8")) {
        pos_ = j;
        lex_quoted(src_[j]);
        emit(out, begin, TokenKind::Literal);
        return;
      }
      pos_ = j;
      emit(out, begin, keyword_set().count(word) ? TokenKind::Keyword : TokenKind::Identifier);
      return;
    }

    if (is_digit(c) || (c == '.' && is_digit(static_cast<unsigned char>(peek(1))))) {
      lex_number();
      emit(out, begin, TokenKind::Literal);
      return;
    }

    if (c == '"' || c == '\'') {
      lex_quoted(static_cast<char>(c));
      emit(out, begin, TokenKind::Literal);
      return;
    }

    for (std::string_view op : multi_char_operators()) {
      if (src_.compare(pos_, op.size(), op) == 0) {
        pos_ += op.size();
        emit(out, begin, TokenKind::Punctuation);
        return;
      }
    }

    // Anything else, printable or not, is a single-byte punctuation token.
    ++pos_;
    emit(out, begin, TokenKind::Punctuation);
  }

  // Approximation of a pp-number: identifier chars, dots, exponent signs.
  void lex_number() {
    while (pos_ < src_.size()) {
      const unsigned char c = static_cast<unsigned char>(src_[pos_]);
      if (is_ident_char(c) || c == '.') {
        ++pos_;
        continue;
      }
      if ((c == '+' || c == '-') && pos_ > 0) {
        const char prev = src_[pos_ - 1];
        if (prev == 'e' || prev == 'E' || prev == 'p' || prev == 'P') {
          ++pos_;
          continue;
        }
      }
      break;
    }
  }

  void lex_quoted(char quote) {
    ++pos_;
    while (pos_ < src_.size()) {
      if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) {
        pos_ += 2;
        continue;
      }
      if (src_[pos_] == quote) {
        ++pos_;
        return;
      }
      if (src_[pos_] == '\n') return;  // unterminated literal stops at EOL
      ++pos_;
    }
  }

  std::string_view src_;
  bool fold_preproc_;
  std::size_t pos_ = 0;
  bool at_line_start_ = true;
};

}  // namespace

TokenSequence tokenize_code(std::string_view source) {
  TokenSequence out;
  for (auto& t : Lexer(source, false).run()) {
    out.tokens.push_back(std::move(t.text));
    out.kinds.push_back(t.kind);
  }
  return out;
}

namespace detail {
std::vector<RawToken> lex_raw(std::string_view source, bool fold_preproc) {
  return Lexer(source, fold_preproc).run();
}
}  // namespace detail

bool is_c_keyword(std::string_view word) { return keyword_set().count(word) != 0; }

const std::vector<std::string>& c_keywords() { return keyword_list(); }

const char* token_kind_name(TokenKind kind) {
  switch (kind) {
    case TokenKind::Keyword: return "keyword";
    case TokenKind::Identifier: return "identifier";
    case TokenKind::Literal: return "literal";
    case TokenKind::Punctuation: return "punctuation";
  }
  return "unknown";
}

}  // namespace cverepair::metric
