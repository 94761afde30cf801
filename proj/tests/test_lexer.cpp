#include <doctest.h>

#include <cctype>
#include <string>

#include "cverepair/lexer.hpp"

using namespace cverepair::metric;

namespace {

// Whitespace-free projection with comments removed, mirroring the C
// translation phase that turns each comment into whitespace.
std::string squeeze(std::string_view src) {
  std::string out;
  std::size_t i = 0;
  while (i < src.size()) {
    if (src[i] == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    if (src[i] == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      i += 2;
      while (i + 1 < src.size() && !(src[i] == '*' && src[i + 1] == '/')) ++i;
      i = i + 1 < src.size() ? i + 2 : src.size();
      continue;
    }
    if (src[i] == '"' || src[i] == '\'') {
      const char q = src[i];
      out += src[i++];
      while (i < src.size() && src[i] != q) {
        if (src[i] == '\\' && i + 1 < src.size()) out += src[i++];
        if (src[i] == '\n') break;
        out += src[i++];
      }
      if (i < src.size() && src[i] == q) out += src[i++];
      continue;
    }
    if (!std::isspace(static_cast<unsigned char>(src[i]))) out += src[i];
    ++i;
  }
  return out;
}

std::string join_squeezed(const TokenSequence& seq) {
  std::string out;
  for (const auto& t : seq.tokens) out += squeeze(t);
  return out;
}

}  // namespace

TEST_CASE("declaration lexes to the definitional token stream") {
  const TokenSequence seq = tokenize_code("int x = 0;");
  REQUIRE(seq.tokens == std::vector<std::string>{"int", "x", "=", "0", ";"});
  REQUIRE(seq.kinds == std::vector<TokenKind>{TokenKind::Keyword, TokenKind::Identifier,
                                              TokenKind::Punctuation, TokenKind::Literal,
                                              TokenKind::Punctuation});
}

TEST_CASE("empty input lexes to an empty sequence") {
  CHECK(tokenize_code("").empty());
  CHECK(tokenize_code("   \n\t ").empty());
  CHECK(tokenize_code("/* only a comment */").empty());
}

TEST_CASE("compact conditional") {
  // Hand-lexed: if ( a < b ) return a ;
  const TokenSequence seq = tokenize_code("if(a<b)return a;");
  CHECK(seq.size() == 9);
  CHECK(seq.tokens[0] == "if");
  CHECK(seq.kinds[0] == TokenKind::Keyword);
  CHECK(seq.tokens[4] == "b");
  CHECK(seq.tokens[6] == "return");
}

TEST_CASE("literals stay single tokens") {
  const TokenSequence seq =
      tokenize_code("const char *s = \"a \\\"quoted\\\" { brace\"; char c = '\\n'; "
                    "double d = 1.5e-3; unsigned m = 0xFFu;");
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq.kinds[i] != TokenKind::Literal) continue;
    const std::string& t = seq.tokens[i];
    const bool known = t.front() == '"' || t.front() == '\'' || std::isdigit((unsigned char)t[0]);
    CHECK(known);
  }
  CHECK(std::count(seq.kinds.begin(), seq.kinds.end(), TokenKind::Literal) == 4);
}

TEST_CASE("multi-character operators are single tokens") {
  const TokenSequence seq = tokenize_code("a <<= b; c ->d; e >= f; g != h; i++;");
  const std::vector<std::string>& t = seq.tokens;
  CHECK(std::find(t.begin(), t.end(), "<<=") != t.end());
  CHECK(std::find(t.begin(), t.end(), "->") != t.end());
  CHECK(std::find(t.begin(), t.end(), ">=") != t.end());
  CHECK(std::find(t.begin(), t.end(), "!=") != t.end());
  CHECK(std::find(t.begin(), t.end(), "++") != t.end());
}

TEST_CASE("lexing is total over unknown bytes") {
  const TokenSequence seq = tokenize_code("int a@ = $1; \x01");
  CHECK(std::find(seq.tokens.begin(), seq.tokens.end(), "@") != seq.tokens.end());
  CHECK(std::find(seq.tokens.begin(), seq.tokens.end(), "$") != seq.tokens.end());
  CHECK(std::find(seq.tokens.begin(), seq.tokens.end(), "\x01") != seq.tokens.end());
}

TEST_CASE("keyword classification") {
  CHECK(is_c_keyword("while"));
  CHECK(is_c_keyword("_Bool"));
  CHECK_FALSE(is_c_keyword("uint32_t"));
  CHECK_FALSE(is_c_keyword("main"));
  CHECK(c_keywords().size() == 44);
}

TEST_CASE("concatenated lexemes round-trip the comment-normalized input") {
  const char* samples[] = {
      "int f(){int a=1; return a;}",
      "if (x /* mid */ > 0) y = \"str with // not comment\";",
      "for(i=0;i<n;++i){s+=v[i];} // tail",
      "p->next = q; a <<= 2; b = c ? d : e;",
      "x = y /*nested /* not really */ + 1;",
  };
  for (const char* s : samples) {
    CAPTURE(s);
    CHECK(join_squeezed(tokenize_code(s)) == squeeze(s));
  }
}
