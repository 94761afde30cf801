#include "cverepair/ast.hpp"

#include <algorithm>
#include <unordered_set>

#include "cverepair/lexer.hpp"

namespace cverepair::metric {
namespace {

using detail::RawToken;

bool is_type_keyword(std::string_view s) {
  static const std::unordered_set<std::string_view> kws = {
      "void", "char", "short", "int",   "long",     "float",
      "double", "signed", "unsigned", "_Bool", "_Complex", "_Imaginary",
  };
  return kws.count(s) != 0;
}

bool is_qualifier(std::string_view s) {
  static const std::unordered_set<std::string_view> kws = {
      "const", "volatile", "restrict", "_Atomic",
      "__restrict", "__restrict__", "__const", "__volatile__",
  };
  return kws.count(s) != 0;
}

bool is_storage_class(std::string_view s) {
  static const std::unordered_set<std::string_view> kws = {
      "typedef", "extern", "static", "auto", "register", "_Thread_local",
  };
  return kws.count(s) != 0;
}

bool is_function_specifier(std::string_view s) {
  static const std::unordered_set<std::string_view> kws = {
      "inline", "_Noreturn", "__inline", "__inline__", "__extension__", "__signed__",
  };
  return kws.count(s) != 0;
}

// GNU-style decorations that are consumed without producing nodes.
bool is_paren_attribute(std::string_view s) {
  return s == "__attribute__" || s == "__attribute" || s == "__declspec" ||
         s == "__typeof__" || s == "typeof" || s == "__builtin_va_arg";
}

bool is_assignment_op(std::string_view s) {
  static const std::unordered_set<std::string_view> ops = {
      "=", "+=", "-=", "*=", "/=", "%=", "<<=", ">>=", "&=", "^=", "|=",
  };
  return ops.count(s) != 0;
}

int binary_precedence(std::string_view s) {
  if (s == "*" || s == "/" || s == "%") return 10;
  if (s == "+" || s == "-") return 9;
  if (s == "<<" || s == ">>") return 8;
  if (s == "<" || s == ">" || s == "<=" || s == ">=") return 7;
  if (s == "==" || s == "!=") return 6;
  if (s == "&") return 5;
  if (s == "^") return 4;
  if (s == "|") return 3;
  if (s == "&&") return 2;
  if (s == "||") return 1;
  return 0;
}

AstNode make_node(std::string kind) {
  AstNode n;
  n.kind = std::move(kind);
  return n;
}

AstNode make_leaf(std::string kind, std::string text) {
  AstNode n;
  n.kind = std::move(kind);
  n.text = std::move(text);
  return n;
}

// Anonymous keyword/operator leaf: the kind is the lexeme.
AstNode anon(std::string_view lexeme) { return make_leaf(std::string(lexeme), ""); }

constexpr int kMaxDepth = 400;

class Parser {
public:
  explicit Parser(std::vector<RawToken> toks) : toks_(std::move(toks)) {}

  SyntaxTree parse() {
    AstNode root = make_node("translation_unit");
    while (!at_end()) {
      const std::size_t before = pos_;
      root.children.push_back(parse_external_declaration());
      if (pos_ == before) force_error_consume(root.children);
    }
    return {std::move(root), ok_};
  }

private:
  // ---- token cursor -------------------------------------------------

  bool at_end() const { return pos_ >= toks_.size(); }

  const RawToken& tok(std::size_t ahead = 0) const {
    static const RawToken eof{"", TokenKind::Punctuation, false};
    return pos_ + ahead < toks_.size() ? toks_[pos_ + ahead] : eof;
  }

  std::string_view text(std::size_t ahead = 0) const { return tok(ahead).text; }
  TokenKind kind(std::size_t ahead = 0) const { return tok(ahead).kind; }

  bool is(std::string_view s, std::size_t ahead = 0) const {
    return !tok(ahead).preproc && text(ahead) == s;
  }
  bool is_ident(std::size_t ahead = 0) const {
    return kind(ahead) == TokenKind::Identifier && !tok(ahead).preproc;
  }
  bool is_literal(std::size_t ahead = 0) const {
    return kind(ahead) == TokenKind::Literal && !tok(ahead).preproc;
  }

  void advance() {
    if (!at_end()) ++pos_;
  }

  bool accept(std::string_view s) {
    if (is(s)) {
      advance();
      return true;
    }
    return false;
  }

  // Missing expected delimiter: recoverable, but the tree is not clean.
  void expect(std::string_view s) {
    if (!accept(s)) ok_ = false;
  }

  std::size_t mark() const { return pos_; }
  void rewind(std::size_t m) { pos_ = m; }

  // ---- leaves -------------------------------------------------------

  AstNode literal_leaf() {
    const std::string& t = tok().text;
    const char first = t.empty() ? '\0' : t[0];
    std::string k = "number_literal";
    if (first == '"' || (t.size() > 1 && (t[1] == '"' || t.back() == '"'))) k = "string_literal";
    if (first == '\'' || (t.size() > 1 && t[1] == '\'')) k = "char_literal";
    AstNode n = make_leaf(std::move(k), t);
    advance();
    return n;
  }

  AstNode identifier_leaf(const char* kind_name = "identifier") {
    AstNode n = make_leaf(kind_name, tok().text);
    advance();
    return n;
  }

  AstNode token_as_error_leaf() {
    const RawToken& t = tok();
    AstNode n;
    if (t.preproc) {
      n = make_leaf("preproc_directive", t.text);
    } else if (t.kind == TokenKind::Identifier) {
      n = make_leaf("identifier", t.text);
    } else if (t.kind == TokenKind::Literal) {
      n = make_leaf("number_literal", t.text);
    } else {
      n = anon(t.text);
    }
    advance();
    return n;
  }

  // ---- error recovery ----------------------------------------------

  void force_error_consume(std::vector<AstNode>& sink) {
    AstNode err = make_node("error");
    err.children.push_back(token_as_error_leaf());
    sink.push_back(std::move(err));
    ok_ = false;
  }

  // Consumes tokens until a likely statement boundary. Swallows the ';',
  // keeps a closing '}' for the enclosing block, and steps over balanced
  // inner braces so the cursor does not desynchronize.
  AstNode error_recover() {
    ok_ = false;
    AstNode err = make_node("error");
    int brace_depth = 0;
    while (!at_end()) {
      if (is(";") && brace_depth == 0) {
        advance();
        break;
      }
      if (is("}")) {
        if (brace_depth == 0) break;
        --brace_depth;
      } else if (is("{")) {
        ++brace_depth;
      }
      err.children.push_back(token_as_error_leaf());
    }
    return err;
  }

  // ---- attributes / asm tolerance ------------------------------------

  void skip_balanced_parens() {
    if (!is("(")) return;
    int depth = 0;
    while (!at_end()) {
      if (is("(")) ++depth;
      if (is(")")) {
        --depth;
        advance();
        if (depth == 0) return;
        continue;
      }
      advance();
    }
  }

  bool skip_decorations() {
    bool any = false;
    while (!at_end()) {
      if (kind() == TokenKind::Identifier && is_paren_attribute(text())) {
        advance();
        skip_balanced_parens();
        any = true;
        continue;
      }
      if (is("__extension__")) {
        advance();
        any = true;
        continue;
      }
      break;
    }
    return any;
  }

  // ---- declarations ---------------------------------------------------

  bool token_starts_specifiers() const {
    const std::string_view t = text();
    if (tok().preproc) return false;
    if (kind() == TokenKind::Keyword) {
      return is_type_keyword(t) || is_qualifier(t) || is_storage_class(t) ||
             is_function_specifier(t) || t == "struct" || t == "union" || t == "enum";
    }
    if (kind() == TokenKind::Identifier) {
      return is_qualifier(t) || is_function_specifier(t) || is_paren_attribute(t);
    }
    return false;
  }

  // Heuristic: does a declaration start here? Needed because snippets lack
  // the typedefs that would normally disambiguate `T * x;` from `a * b;`.
  bool looks_like_declaration() const {
    if (token_starts_specifiers()) return true;
    if (!is_ident()) return false;
    // typedef-name declarations: `T x`, `T *x`, `T **x`, `T x[`, `T x(`
    std::size_t a = 1;
    while (is("*", a)) ++a;
    if (a > 1) return is_ident(a);
    return is_ident(1);
  }

  // Collects declaration specifiers. `saw_type_word` prevents a second
  // identifier from being eaten as a type name (`T x` stops after T).
  std::vector<AstNode> parse_specifiers() {
    std::vector<AstNode> specs;
    bool saw_type_word = false;
    while (!at_end()) {
      const std::string_view t = text();
      if (tok().preproc) break;
      if (kind() == TokenKind::Identifier && is_paren_attribute(t)) {
        advance();
        skip_balanced_parens();
        continue;
      }
      if (kind() == TokenKind::Keyword || kind() == TokenKind::Identifier) {
        if (is_qualifier(t) || is_storage_class(t) || is_function_specifier(t)) {
          specs.push_back(anon(t));
          advance();
          continue;
        }
        if (is_type_keyword(t)) {
          specs.push_back(anon(t));
          advance();
          saw_type_word = true;
          continue;
        }
        if (t == "struct" || t == "union" || t == "enum") {
          specs.push_back(parse_tagged_specifier());
          saw_type_word = true;
          continue;
        }
        if (kind() == TokenKind::Identifier && !saw_type_word && identifier_can_be_type_name()) {
          specs.push_back(identifier_leaf("type_identifier"));
          saw_type_word = true;
          continue;
        }
      }
      break;
    }
    return specs;
  }

  // An identifier in specifier position is taken as a typedef name when a
  // declarator can plausibly follow it.
  bool identifier_can_be_type_name() const {
    if (is_ident(1)) return true;                      // T x
    if (is("*", 1)) return true;                       // T *x
    if (is("(", 1) && is("*", 2)) return true;         // T (*f)(...)
    if (is(")", 1) || is(",", 1)) return true;         // cast / parameter
    if (is("[", 1)) return true;                       // abstract array
    return false;
  }

  AstNode parse_tagged_specifier() {
    const std::string tag_kw(text());  // struct / union / enum
    AstNode node = make_node(tag_kw + "_specifier");
    node.children.push_back(anon(tag_kw));
    advance();
    skip_decorations();
    if (is_ident()) node.children.push_back(identifier_leaf("type_identifier"));
    if (is("{")) {
      advance();
      if (tag_kw == "enum") {
        AstNode list = make_node("enumerator_list");
        while (!at_end() && !is("}")) {
          const std::size_t before = pos_;
          AstNode e = make_node("enumerator");
          if (is_ident()) e.children.push_back(identifier_leaf());
          if (accept("=")) e.children.push_back(parse_assignment());
          list.children.push_back(std::move(e));
          if (!accept(",") && !is("}")) {
            list.children.push_back(error_recover());
          }
          if (pos_ == before) force_error_consume(list.children);
        }
        expect("}");
        node.children.push_back(std::move(list));
      } else {
        AstNode list = make_node("field_declaration_list");
        while (!at_end() && !is("}")) {
          const std::size_t before = pos_;
          if (tok().preproc) {
            list.children.push_back(make_leaf("preproc_directive", tok().text));
            advance();
            continue;
          }
          list.children.push_back(parse_declaration());
          if (pos_ == before) force_error_consume(list.children);
        }
        expect("}");
        node.children.push_back(std::move(list));
      }
    }
    return node;
  }

  // declarator := '*'* direct_declarator suffixes
  AstNode parse_declarator(bool allow_abstract) {
    skip_decorations();
    if (is("*")) {
      advance();
      AstNode node = make_node("pointer_declarator");
      while (!at_end() && (is_qualifier(text()) || is_paren_attribute(text()))) {
        if (is_paren_attribute(text())) {
          advance();
          skip_balanced_parens();
        } else {
          node.children.push_back(anon(text()));
          advance();
        }
      }
      node.children.push_back(parse_declarator(allow_abstract));
      return node;
    }
    AstNode direct = parse_direct_declarator(allow_abstract);
    return parse_declarator_suffixes(std::move(direct));
  }

  AstNode parse_direct_declarator(bool allow_abstract) {
    skip_decorations();
    if (is_ident()) return identifier_leaf();
    if (is("(") && !at_end()) {
      // '(' declarator ')' grouping, e.g. function pointers
      const std::size_t m = mark();
      advance();
      if (is("*") || is_ident() || is("(")) {
        AstNode inner = parse_declarator(allow_abstract);
        if (accept(")")) {
          AstNode grouped = make_node("parenthesized_declarator");
          grouped.children.push_back(std::move(inner));
          return grouped;
        }
      }
      rewind(m);
    }
    // abstract declarator (no name), used in prototypes and casts
    return make_node(allow_abstract ? "abstract_declarator" : "missing_declarator");
  }

  AstNode parse_declarator_suffixes(AstNode inner) {
    while (!at_end()) {
      if (is("(")) {
        advance();
        AstNode fn = make_node("function_declarator");
        fn.children.push_back(std::move(inner));
        fn.children.push_back(parse_parameter_list());
        expect(")");
        inner = std::move(fn);
        continue;
      }
      if (is("[")) {
        advance();
        AstNode arr = make_node("array_declarator");
        arr.children.push_back(std::move(inner));
        if (!is("]")) arr.children.push_back(parse_assignment());
        expect("]");
        inner = std::move(arr);
        continue;
      }
      break;
    }
    return inner;
  }

  AstNode parse_parameter_list() {
    AstNode list = make_node("parameter_list");
    if (is(")")) return list;
    while (!at_end()) {
      const std::size_t before = pos_;
      if (is("...")) {
        list.children.push_back(anon("..."));
        advance();
      } else {
        AstNode param = make_node("parameter_declaration");
        auto specs = parse_specifiers();
        const bool had_specs = !specs.empty();
        for (auto& s : specs) param.children.push_back(std::move(s));
        if (!is(",") && !is(")")) {
          param.children.push_back(parse_declarator(/*allow_abstract=*/true));
        } else if (!had_specs && is_ident()) {
          param.children.push_back(identifier_leaf());  // K&R-style name
        }
        list.children.push_back(std::move(param));
      }
      if (accept(",")) continue;
      if (is(")")) break;
      if (pos_ == before) {
        force_error_consume(list.children);
        if (is(")") || at_end()) break;
      }
    }
    return list;
  }

  // Parses a declaration statement, consuming the trailing ';'.
  AstNode parse_declaration() {
    AstNode decl = make_node("declaration");
    auto specs = parse_specifiers();
    for (auto& s : specs) decl.children.push_back(std::move(s));
    if (is(";")) {  // bare struct/enum declaration
      advance();
      return decl;
    }
    while (!at_end()) {
      const std::size_t before = pos_;
      AstNode d = parse_declarator(/*allow_abstract=*/false);
      skip_decorations();
      if (accept("=")) {
        AstNode init = make_node("init_declarator");
        init.children.push_back(std::move(d));
        init.children.push_back(parse_initializer());
        decl.children.push_back(std::move(init));
      } else {
        decl.children.push_back(std::move(d));
      }
      if (accept(",")) {
        if (pos_ == before) break;
        continue;
      }
      break;
    }
    if (accept(":")) {  // bitfield
      decl.children.push_back(parse_conditional());
    }
    expect(";");
    return decl;
  }

  AstNode parse_initializer() {
    if (is("{")) return parse_initializer_list();
    return parse_assignment();
  }

  AstNode parse_initializer_list() {
    AstNode list = make_node("initializer_list");
    advance();  // '{'
    while (!at_end() && !is("}")) {
      const std::size_t before = pos_;
      if (is(".") && is_ident(1)) {
        AstNode desig = make_node("designated_initializer");
        advance();
        desig.children.push_back(identifier_leaf("field_identifier"));
        expect("=");
        desig.children.push_back(parse_initializer());
        list.children.push_back(std::move(desig));
      } else if (is("[")) {
        AstNode desig = make_node("designated_initializer");
        advance();
        desig.children.push_back(parse_conditional());
        expect("]");
        expect("=");
        desig.children.push_back(parse_initializer());
        list.children.push_back(std::move(desig));
      } else {
        list.children.push_back(parse_initializer());
      }
      if (!accept(",") && !is("}")) {
        list.children.push_back(error_recover());
        if (is("}")) break;
      }
      if (pos_ == before) force_error_consume(list.children);
    }
    expect("}");
    return list;
  }

  // ---- external level -------------------------------------------------

  AstNode parse_external_declaration() {
    if (tok().preproc) {
      AstNode n = make_leaf("preproc_directive", tok().text);
      advance();
      return n;
    }
    if (is(";")) {
      advance();
      return make_node("empty_statement");
    }
    skip_decorations();

    const std::size_t m = mark();
    AstNode decl = make_node("function_definition");
    auto specs = parse_specifiers();
    for (auto& s : specs) decl.children.push_back(std::move(s));

    if (is(";")) {  // struct/enum/union definition alone
      advance();
      decl.kind = "declaration";
      return decl;
    }

    AstNode declarator = parse_declarator(/*allow_abstract=*/false);
    const bool named = declarator_has_name(declarator);
    skip_decorations();

    if (is("{") && named) {
      decl.children.push_back(std::move(declarator));
      decl.children.push_back(parse_compound());
      return decl;
    }

    // K&R parameter declarations between declarator and body.
    if (named && looks_like_declaration()) {
      decl.children.push_back(std::move(declarator));
      AstNode knr = make_node("knr_parameter_declarations");
      while (!at_end() && !is("{") && looks_like_declaration()) {
        const std::size_t before = pos_;
        knr.children.push_back(parse_declaration());
        if (pos_ == before) break;
      }
      decl.children.push_back(std::move(knr));
      if (is("{")) {
        decl.children.push_back(parse_compound());
        return decl;
      }
      decl.kind = "declaration";
      return decl;
    }

    if (named || !decl.children.empty()) {
      // Plain declaration (prototype, globals), possibly with initializer.
      decl.kind = "declaration";
      if (accept("=")) {
        AstNode init = make_node("init_declarator");
        init.children.push_back(std::move(declarator));
        init.children.push_back(parse_initializer());
        decl.children.push_back(std::move(init));
      } else {
        decl.children.push_back(std::move(declarator));
      }
      while (accept(",")) {
        AstNode d = parse_declarator(false);
        if (accept("=")) {
          AstNode init = make_node("init_declarator");
          init.children.push_back(std::move(d));
          init.children.push_back(parse_initializer());
          decl.children.push_back(std::move(init));
        } else {
          decl.children.push_back(std::move(d));
        }
      }
      expect(";");
      return decl;
    }

    rewind(m);
    // Not a declaration shape at all; tolerate a stray statement.
    return parse_statement();
  }

  static bool declarator_has_name(const AstNode& d) {
    if (d.kind == "identifier") return true;
    for (const auto& c : d.children) {
      if (declarator_has_name(c)) return true;
    }
    return false;
  }

  // ---- statements -------------------------------------------------

  AstNode parse_compound() {
    AstNode block = make_node("compound_statement");
    expect("{");
    while (!at_end() && !is("}")) {
      const std::size_t before = pos_;
      block.children.push_back(parse_statement());
      if (pos_ == before) force_error_consume(block.children);
    }
    expect("}");
    return block;
  }

  AstNode parse_statement() {
    if (depth_ > kMaxDepth) {
      AstNode err = make_node("error");
      err.children.push_back(token_as_error_leaf());
      ok_ = false;
      return err;
    }
    ++depth_;
    AstNode n = parse_statement_inner();
    --depth_;
    return n;
  }

  AstNode parse_statement_inner() {
    if (tok().preproc) {
      AstNode n = make_leaf("preproc_directive", tok().text);
      advance();
      return n;
    }
    if (is("{")) return parse_compound();
    if (is(";")) {
      advance();
      return make_node("empty_statement");
    }
    if (is("if")) return parse_if();
    if (is("while")) return parse_while();
    if (is("do")) return parse_do();
    if (is("for")) return parse_for();
    if (is("switch")) return parse_switch();
    if (is("case")) {
      advance();
      AstNode n = make_node("case_statement");
      n.children.push_back(parse_conditional());
      expect(":");
      if (!is("}") && !is("case") && !is("default") && !at_end()) {
        n.children.push_back(parse_statement());
      }
      return n;
    }
    if (is("default")) {
      advance();
      AstNode n = make_node("default_statement");
      expect(":");
      if (!is("}") && !is("case") && !is("default") && !at_end()) {
        n.children.push_back(parse_statement());
      }
      return n;
    }
    if (is("return")) {
      advance();
      AstNode n = make_node("return_statement");
      if (!is(";")) n.children.push_back(parse_expression());
      expect(";");
      return n;
    }
    if (is("break")) {
      advance();
      expect(";");
      return make_node("break_statement");
    }
    if (is("continue")) {
      advance();
      expect(";");
      return make_node("continue_statement");
    }
    if (is("goto")) {
      advance();
      AstNode n = make_node("goto_statement");
      if (is_ident()) n.children.push_back(identifier_leaf("label_identifier"));
      expect(";");
      return n;
    }
    if ((is("asm") || is("__asm__") || is("__asm")) && !at_end()) {
      advance();
      while (is_qualifier(text()) || is("volatile") || is("goto")) advance();
      skip_balanced_parens();
      expect(";");
      return make_node("asm_statement");
    }
    if (is_ident() && is(":", 1) && !is("::", 1)) {
      AstNode n = make_node("labeled_statement");
      n.children.push_back(identifier_leaf("label_identifier"));
      advance();  // ':'
      if (!is("}") && !at_end()) n.children.push_back(parse_statement());
      return n;
    }
    if (looks_like_declaration()) return parse_declaration();

    // expression statement
    const std::size_t before = pos_;
    AstNode expr = parse_expression();
    if (pos_ == before) return error_recover();
    AstNode stmt = make_node("expression_statement");
    stmt.children.push_back(std::move(expr));
    expect(";");
    return stmt;
  }

  AstNode parse_if() {
    advance();  // 'if'
    AstNode n = make_node("if_statement");
    expect("(");
    n.children.push_back(parse_expression());
    expect(")");
    n.children.push_back(parse_statement());
    if (accept("else")) n.children.push_back(parse_statement());
    return n;
  }

  AstNode parse_while() {
    advance();
    AstNode n = make_node("while_statement");
    expect("(");
    n.children.push_back(parse_expression());
    expect(")");
    n.children.push_back(parse_statement());
    return n;
  }

  AstNode parse_do() {
    advance();
    AstNode n = make_node("do_statement");
    n.children.push_back(parse_statement());
    expect("while");
    expect("(");
    n.children.push_back(parse_expression());
    expect(")");
    expect(";");
    return n;
  }

  AstNode parse_for() {
    advance();
    AstNode n = make_node("for_statement");
    expect("(");

    AstNode init = make_node("for_init");
    if (is(";")) {
      advance();
    } else if (looks_like_declaration()) {
      init.children.push_back(parse_declaration());  // consumes its ';'
    } else {
      init.children.push_back(parse_expression());
      expect(";");
    }
    n.children.push_back(std::move(init));

    AstNode cond = make_node("for_cond");
    if (!is(";")) cond.children.push_back(parse_expression());
    expect(";");
    n.children.push_back(std::move(cond));

    AstNode update = make_node("for_update");
    if (!is(")")) update.children.push_back(parse_expression());
    expect(")");
    n.children.push_back(std::move(update));

    n.children.push_back(parse_statement());
    return n;
  }

  AstNode parse_switch() {
    advance();
    AstNode n = make_node("switch_statement");
    expect("(");
    n.children.push_back(parse_expression());
    expect(")");
    n.children.push_back(parse_statement());
    return n;
  }

  // ---- expressions -------------------------------------------------

  AstNode parse_expression() {
    if (depth_ > kMaxDepth) {
      ok_ = false;
      AstNode err = make_node("error");
      if (!at_end()) err.children.push_back(token_as_error_leaf());
      return err;
    }
    ++depth_;
    AstNode lhs = parse_assignment();
    while (is(",")) {
      advance();
      AstNode comma = make_node("comma_expression");
      comma.children.push_back(std::move(lhs));
      comma.children.push_back(parse_assignment());
      lhs = std::move(comma);
    }
    --depth_;
    return lhs;
  }

  AstNode parse_assignment() {
    AstNode lhs = parse_conditional();
    if (!at_end() && is_assignment_op(text())) {
      AstNode n = make_node("assignment_expression");
      n.children.push_back(std::move(lhs));
      n.children.push_back(anon(text()));
      advance();
      n.children.push_back(parse_assignment());
      return n;
    }
    return lhs;
  }

  AstNode parse_conditional() {
    AstNode cond = parse_binary(1);
    if (accept("?")) {
      AstNode n = make_node("conditional_expression");
      n.children.push_back(std::move(cond));
      n.children.push_back(parse_expression());
      expect(":");
      n.children.push_back(parse_conditional());
      return n;
    }
    return cond;
  }

  AstNode parse_binary(int min_prec) {
    AstNode lhs = parse_unary();
    while (!at_end()) {
      const int prec = tok().preproc ? 0 : binary_precedence(text());
      if (prec == 0 || prec < min_prec) break;
      AstNode n = make_node("binary_expression");
      n.children.push_back(std::move(lhs));
      n.children.push_back(anon(text()));
      advance();
      n.children.push_back(parse_binary(prec + 1));
      lhs = std::move(n);
    }
    return lhs;
  }

  bool starts_expression_after_cast() const {
    if (at_end() || tok().preproc) return false;
    if (is_ident() || is_literal()) return true;
    return is("(") || is("!") || is("~") || is("++") || is("--") || is("sizeof");
  }

  AstNode parse_unary() {
    if (depth_ > kMaxDepth) {
      ok_ = false;
      AstNode err = make_node("error");
      if (!at_end()) err.children.push_back(token_as_error_leaf());
      return err;
    }
    ++depth_;
    AstNode n = parse_unary_inner();
    --depth_;
    return n;
  }

  AstNode parse_unary_inner() {
    if (is("++") || is("--")) {
      AstNode n = make_node("update_expression");
      n.children.push_back(anon(text()));
      advance();
      n.children.push_back(parse_unary());
      return n;
    }
    if (is("!") || is("~") || is("+") || is("-") || is("*") || is("&")) {
      AstNode n = make_node("unary_expression");
      n.children.push_back(anon(text()));
      advance();
      n.children.push_back(parse_unary());
      return n;
    }
    if (is("sizeof") || is("_Alignof")) {
      AstNode n = make_node("sizeof_expression");
      advance();
      if (is("(")) {
        const std::size_t m = mark();
        advance();
        AstNode type;
        if (try_parse_type_descriptor(type) && is(")")) {
          advance();
          n.children.push_back(std::move(type));
          return n;
        }
        rewind(m);
      }
      n.children.push_back(parse_unary());
      return n;
    }
    if (is("(")) {
      const std::size_t m = mark();
      advance();
      AstNode type;
      if (try_parse_type_descriptor(type) && is(")")) {
        advance();
        if (is("{")) {  // compound literal
          AstNode n = make_node("compound_literal");
          n.children.push_back(std::move(type));
          n.children.push_back(parse_initializer_list());
          return parse_postfix_suffixes(std::move(n));
        }
        if (starts_expression_after_cast()) {
          AstNode n = make_node("cast_expression");
          n.children.push_back(std::move(type));
          n.children.push_back(parse_unary());
          return n;
        }
      }
      rewind(m);
    }
    return parse_postfix();
  }

  // Type descriptor for casts / sizeof: specifiers + abstract declarator.
  // Returns false (cursor untouched by caller's rewind) when nothing
  // type-like is present.
  bool try_parse_type_descriptor(AstNode& out) {
    if (at_end() || tok().preproc) return false;
    const std::string_view t = text();
    const bool kw_start = kind() == TokenKind::Keyword &&
                          (is_type_keyword(t) || is_qualifier(t) || t == "struct" ||
                           t == "union" || t == "enum");
    const bool ident_start =
        kind() == TokenKind::Identifier &&
        (is_qualifier(t) || is("*", 1) || is(")", 1) || is("[", 1));
    if (!kw_start && !ident_start) return false;

    AstNode type = make_node("type_descriptor");
    auto specs = parse_specifiers();
    if (specs.empty()) {
      if (!is_ident()) return false;
      type.children.push_back(identifier_leaf("type_identifier"));
    } else {
      for (auto& s : specs) type.children.push_back(std::move(s));
    }
    if (is("*") || is("(") || is("[")) {
      type.children.push_back(parse_declarator(/*allow_abstract=*/true));
    }
    out = std::move(type);
    return true;
  }

  AstNode parse_postfix() { return parse_postfix_suffixes(parse_primary()); }

  AstNode parse_postfix_suffixes(AstNode expr) {
    while (!at_end()) {
      if (is("(")) {
        advance();
        AstNode call = make_node("call_expression");
        call.children.push_back(std::move(expr));
        AstNode args = make_node("argument_list");
        while (!at_end() && !is(")")) {
          const std::size_t before = pos_;
          args.children.push_back(parse_assignment());
          if (!accept(",")) break;
          if (pos_ == before) {
            force_error_consume(args.children);
            break;
          }
        }
        expect(")");
        call.children.push_back(std::move(args));
        expr = std::move(call);
        continue;
      }
      if (is("[")) {
        advance();
        AstNode sub = make_node("subscript_expression");
        sub.children.push_back(std::move(expr));
        sub.children.push_back(parse_expression());
        expect("]");
        expr = std::move(sub);
        continue;
      }
      if (is(".") || is("->")) {
        AstNode field = make_node("field_expression");
        field.children.push_back(std::move(expr));
        field.children.push_back(anon(text()));
        advance();
        if (is_ident()) {
          field.children.push_back(identifier_leaf("field_identifier"));
        } else {
          ok_ = false;
        }
        expr = std::move(field);
        continue;
      }
      if (is("++") || is("--")) {
        AstNode upd = make_node("update_expression");
        upd.children.push_back(std::move(expr));
        upd.children.push_back(anon(text()));
        advance();
        expr = std::move(upd);
        continue;
      }
      break;
    }
    return expr;
  }

  AstNode parse_primary() {
    if (at_end() || tok().preproc) {
      ok_ = false;
      AstNode err = make_node("error");
      if (!at_end()) err.children.push_back(token_as_error_leaf());
      return err;
    }
    if (is_literal()) {
      AstNode lit = literal_leaf();
      // Adjacent string literals concatenate into one token.
      while (lit.kind == "string_literal" && is_literal() && !tok().text.empty() &&
             (tok().text[0] == '"' || tok().text.find('"') != std::string::npos)) {
        lit.text += tok().text;
        advance();
      }
      return lit;
    }
    if (is_ident()) return identifier_leaf();
    if (kind() == TokenKind::Keyword && !is("sizeof")) {
      // Keywords never begin a primary expression; soak one up as an error.
      return error_leaf_here();
    }
    if (is("(")) {
      advance();
      AstNode n = make_node("parenthesized_expression");
      n.children.push_back(parse_expression());
      expect(")");
      return n;
    }
    return error_leaf_here();
  }

  AstNode error_leaf_here() {
    ok_ = false;
    AstNode err = make_node("error");
    if (!at_end()) err.children.push_back(token_as_error_leaf());
    return err;
  }

  std::vector<RawToken> toks_;
  std::size_t pos_ = 0;
  bool ok_ = true;
  int depth_ = 0;
};

}  // namespace

SyntaxTree parse_c(std::string_view source) {
  return Parser(detail::lex_raw(source, /*fold_preproc=*/true)).parse();
}

int node_height(const AstNode& node) {
  int best = 0;
  for (const auto& c : node.children) best = std::max(best, node_height(c));
  return best + 1;
}

nlohmann::json ast_to_json(const AstNode& node) {
  nlohmann::json j;
  j["kind"] = node.kind;
  if (!node.text.empty()) j["text"] = node.text;
  if (!node.children.empty()) {
    nlohmann::json kids = nlohmann::json::array();
    for (const auto& c : node.children) kids.push_back(ast_to_json(c));
    j["children"] = std::move(kids);
  }
  return j;
}

AstNode ast_from_json(const nlohmann::json& j) {
  AstNode n;
  n.kind = j.at("kind").get<std::string>();
  if (j.contains("text")) n.text = j["text"].get<std::string>();
  if (j.contains("children")) {
    for (const auto& c : j["children"]) n.children.push_back(ast_from_json(c));
  }
  return n;
}

std::string ast_to_sexpr(const AstNode& node) {
  if (node.children.empty()) return node.kind;
  std::string out = "(" + node.kind;
  for (const auto& c : node.children) {
    out += ' ';
    out += ast_to_sexpr(c);
  }
  out += ')';
  return out;
}

}  // namespace cverepair::metric
