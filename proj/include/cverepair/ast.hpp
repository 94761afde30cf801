#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cverepair::metric {

// Generic syntax-tree node. Interior kinds name grammar productions
// (function_definition, if_statement, binary_expression, ...). Leaf kinds
// are either token classes carrying their lexeme in `text` (identifier,
// field_identifier, number_literal, string_literal, char_literal,
// preproc_directive) or anonymous keyword/operator nodes whose kind is the
// lexeme itself ("int", "+", "->", ...). Pure delimiters (braces, parens,
// semicolons, commas) are not represented.
struct AstNode {
  std::string kind;
  std::string text;
  std::vector<AstNode> children;

  bool is_leaf() const { return children.empty(); }
};

struct SyntaxTree {
  AstNode root;     // kind "translation_unit"
  bool parse_ok;    // false when any error node was produced
};

// Error-tolerant C parser. Function snippets without their headers still
// yield trees: unknown type names are accepted as typedef names by
// heuristic, and unparseable token runs are wrapped in "error" nodes
// (with parse_ok = false) instead of aborting. Never throws on any input.
SyntaxTree parse_c(std::string_view source);

// Height of a node: 1 for a childless node, else 1 + max over children.
int node_height(const AstNode& node);

nlohmann::json ast_to_json(const AstNode& node);
AstNode ast_from_json(const nlohmann::json& j);

// S-expression rendering of kinds only; used by tests and debugging.
std::string ast_to_sexpr(const AstNode& node);

}  // namespace cverepair::metric
