#include "cverepair/dataflow.hpp"

#include <map>
#include <unordered_map>

namespace cverepair::metric {
namespace {

// Reaching definitions per variable name. Ordered map so merges and
// comparisons are deterministic.
using Env = std::map<std::string, std::set<int>>;

Env merge(const Env& a, const Env& b) {
  Env out = a;
  for (const auto& [name, defs] : b) out[name].insert(defs.begin(), defs.end());
  return out;
}

constexpr int kMaxLoopIterations = 10;

class Extractor {
public:
  DataflowGraph run(const AstNode& root) {
    walk_stmt(root, Env{});
    DataflowGraph g;
    g.edges = std::move(edges_);
    g.variable_count = static_cast<int>(var_ids_.size());
    return g;
  }

private:
  // ---- bookkeeping ---------------------------------------------------

  int var_id(const std::string& name) {
    auto it = var_ids_.find(name);
    if (it != var_ids_.end()) return it->second;
    const int id = static_cast<int>(var_ids_.size());
    var_ids_.emplace(name, id);
    return id;
  }

  // Ordinals are pinned to the syntax node so loop re-walks see the same
  // numbering as the first pass.
  int occurrence(const AstNode* node, const std::string& name) {
    auto it = node_occurrence_.find(node);
    if (it != node_occurrence_.end()) return it->second;
    const int ord = occurrence_counter_[name]++;
    node_occurrence_.emplace(node, ord);
    return ord;
  }

  void record_use(const std::string& name, const Env& env, int ord) {
    const int vid = var_id(name);
    auto it = env.find(name);
    if (it == env.end()) return;
    for (int def_ord : it->second) edges_.insert({vid, def_ord, ord});
  }

  void record_def(const std::string& name, Env& env, int ord) {
    var_id(name);
    env[name] = {ord};
  }

  // ---- declarator helpers ---------------------------------------------

  static const AstNode* declared_identifier(const AstNode& declarator) {
    if (declarator.kind == "identifier") return &declarator;
    for (const auto& c : declarator.children) {
      if (const AstNode* n = declared_identifier(c)) return n;
    }
    return nullptr;
  }

  // Array size expressions inside a declarator are ordinary uses.
  Env walk_declarator_sizes(const AstNode& declarator, Env env) {
    if (declarator.kind == "array_declarator") {
      if (const auto n = declarator.children.size(); n >= 2) {
        for (std::size_t i = 1; i < n; ++i) env = walk_expr(declarator.children[i], env);
      }
      if (!declarator.children.empty()) {
        return walk_declarator_sizes(declarator.children[0], std::move(env));
      }
      return env;
    }
    for (const auto& c : declarator.children) {
      if (c.kind == "parameter_list") continue;  // nested prototypes
      env = walk_declarator_sizes(c, std::move(env));
    }
    return env;
  }

  Env define_parameters(const AstNode& declarator, Env env) {
    if (declarator.kind == "parameter_list") {
      for (const auto& p : declarator.children) {
        if (p.kind != "parameter_declaration") continue;
        for (const auto& c : p.children) {
          if (c.kind == "identifier" || c.kind == "pointer_declarator" ||
              c.kind == "array_declarator" || c.kind == "function_declarator" ||
              c.kind == "parenthesized_declarator") {
            if (const AstNode* name = declared_identifier(c)) {
              record_def(name->text, env, occurrence(name, name->text));
            }
            break;
          }
        }
      }
      return env;
    }
    for (const auto& c : declarator.children) env = define_parameters(c, std::move(env));
    return env;
  }

  // ---- statements ------------------------------------------------------

  Env walk_stmt(const AstNode& node, Env env) {
    const std::string& k = node.kind;

    if (k == "error" || k == "preproc_directive" || k == "empty_statement" ||
        k == "break_statement" || k == "continue_statement" || k == "goto_statement" ||
        k == "asm_statement") {
      return env;
    }
    if (k == "struct_specifier" || k == "union_specifier" || k == "enum_specifier") {
      return env;
    }

    if (k == "function_definition") {
      for (const auto& c : node.children) {
        if (c.kind == "compound_statement" || c.kind == "knr_parameter_declarations") {
          env = walk_stmt(c, std::move(env));
        } else if (c.kind != "error") {
          env = define_parameters(c, std::move(env));
        }
      }
      return env;
    }

    if (k == "declaration") {
      for (const auto& c : node.children) {
        if (c.kind == "init_declarator" && c.children.size() >= 2) {
          env = walk_declarator_sizes(c.children[0], std::move(env));
          env = walk_expr(c.children[1], std::move(env));
          if (const AstNode* name = declared_identifier(c.children[0])) {
            record_def(name->text, env, occurrence(name, name->text));
          }
        } else if (c.kind == "identifier" || c.kind == "pointer_declarator" ||
                   c.kind == "array_declarator" || c.kind == "function_declarator" ||
                   c.kind == "parenthesized_declarator") {
          env = walk_declarator_sizes(c, std::move(env));
        }
        // specifiers and bitfield widths contribute nothing
      }
      return env;
    }

    if (k == "expression_statement") {
      for (const auto& c : node.children) env = walk_expr(c, std::move(env));
      return env;
    }

    if (k == "if_statement") {
      if (node.children.empty()) return env;
      Env env0 = walk_expr(node.children[0], std::move(env));
      Env then_env = node.children.size() > 1 ? walk_stmt(node.children[1], env0) : env0;
      Env else_env = node.children.size() > 2 ? walk_stmt(node.children[2], env0) : env0;
      return merge(then_env, else_env);
    }

    if (k == "while_statement") {
      if (node.children.size() < 2) return env;
      Env env_in = std::move(env);
      Env env_cond;
      for (int i = 0; i < kMaxLoopIterations; ++i) {
        env_cond = walk_expr(node.children[0], env_in);
        Env env_body = walk_stmt(node.children[1], env_cond);
        Env merged = merge(env_in, env_body);
        if (merged == env_in) break;
        env_in = std::move(merged);
      }
      return env_cond;
    }

    if (k == "do_statement") {
      if (node.children.size() < 2) return env;
      Env env_in = std::move(env);
      Env env_cond;
      for (int i = 0; i < kMaxLoopIterations; ++i) {
        Env env_body = walk_stmt(node.children[0], env_in);
        env_cond = walk_expr(node.children[1], env_body);
        Env merged = merge(env_in, env_cond);
        if (merged == env_in) break;
        env_in = std::move(merged);
      }
      return env_cond;
    }

    if (k == "for_statement") {
      if (node.children.size() < 4) return env;
      const AstNode& init = node.children[0];
      const AstNode& cond = node.children[1];
      const AstNode& update = node.children[2];
      const AstNode& body = node.children[3];

      Env env_in = std::move(env);
      if (!init.children.empty()) {
        env_in = init.children[0].kind == "declaration"
                     ? walk_stmt(init.children[0], std::move(env_in))
                     : walk_expr(init.children[0], std::move(env_in));
      }
      Env env_cond = env_in;
      for (int i = 0; i < kMaxLoopIterations; ++i) {
        env_cond = cond.children.empty() ? env_in : walk_expr(cond.children[0], env_in);
        Env env_body = walk_stmt(body, env_cond);
        if (!update.children.empty()) env_body = walk_expr(update.children[0], std::move(env_body));
        Env merged = merge(env_in, env_body);
        if (merged == env_in) break;
        env_in = std::move(merged);
      }
      return env_cond;
    }

    if (k == "switch_statement") {
      if (node.children.empty()) return env;
      Env env0 = walk_expr(node.children[0], std::move(env));
      if (node.children.size() < 2) return env0;
      const AstNode& body = node.children[1];
      Env out = env0;
      if (body.kind == "compound_statement") {
        for (const auto& c : body.children) out = merge(out, walk_stmt(c, env0));
      } else {
        out = merge(out, walk_stmt(body, env0));
      }
      return out;
    }

    if (k == "case_statement") {
      Env e = std::move(env);
      if (!node.children.empty()) e = walk_expr(node.children[0], std::move(e));
      if (node.children.size() > 1) e = walk_stmt(node.children[1], std::move(e));
      return e;
    }
    if (k == "default_statement" || k == "labeled_statement") {
      Env e = std::move(env);
      for (const auto& c : node.children) {
        if (c.kind == "label_identifier") continue;
        e = walk_stmt(c, std::move(e));
      }
      return e;
    }

    if (k == "return_statement") {
      for (const auto& c : node.children) env = walk_expr(c, std::move(env));
      return env;
    }

    if (k == "translation_unit" || k == "compound_statement" ||
        k == "knr_parameter_declarations" || k == "field_declaration_list") {
      for (const auto& c : node.children) env = walk_stmt(c, std::move(env));
      return env;
    }

    // Anything expression-like in statement position.
    return walk_expr(node, std::move(env));
  }

  // ---- expressions -----------------------------------------------------

  Env walk_expr(const AstNode& node, Env env) {
    const std::string& k = node.kind;

    if (k == "identifier") {
      const int ord = occurrence(&node, node.text);
      record_use(node.text, env, ord);
      return env;
    }
    if (node.is_leaf()) return env;  // literals, operators, field names, types

    if (k == "error" || k == "type_descriptor" || k == "struct_specifier" ||
        k == "union_specifier" || k == "enum_specifier") {
      return env;
    }

    if (k == "assignment_expression" && node.children.size() == 3) {
      const AstNode& lhs = node.children[0];
      const std::string& op = node.children[1].kind;
      env = walk_expr(node.children[2], std::move(env));
      if (lhs.kind == "identifier") {
        const int ord = occurrence(&lhs, lhs.text);
        if (op != "=") record_use(lhs.text, env, ord);
        record_def(lhs.text, env, ord);
        return env;
      }
      return walk_expr(lhs, std::move(env));
    }

    if (k == "update_expression") {
      const AstNode* operand = nullptr;
      for (const auto& c : node.children) {
        if (c.kind != "++" && c.kind != "--") operand = &c;
      }
      if (operand == nullptr) return env;
      if (operand->kind == "identifier") {
        const int ord = occurrence(operand, operand->text);
        record_use(operand->text, env, ord);
        record_def(operand->text, env, ord);
        return env;
      }
      return walk_expr(*operand, std::move(env));
    }

    if (k == "conditional_expression" && node.children.size() == 3) {
      Env env0 = walk_expr(node.children[0], std::move(env));
      Env e1 = walk_expr(node.children[1], env0);
      Env e2 = walk_expr(node.children[2], env0);
      return merge(e1, e2);
    }

    if (k == "call_expression") {
      for (const auto& c : node.children) {
        if (&c == &node.children.front() && c.kind == "identifier") continue;  // callee name
        env = walk_expr(c, std::move(env));
      }
      return env;
    }

    if (k == "field_expression") {
      if (!node.children.empty()) env = walk_expr(node.children[0], std::move(env));
      return env;
    }

    if (k == "cast_expression") {
      for (const auto& c : node.children) {
        if (c.kind != "type_descriptor") env = walk_expr(c, std::move(env));
      }
      return env;
    }

    // binary/unary/subscript/paren/comma/argument lists/initializers/sizeof:
    // children left to right.
    for (const auto& c : node.children) env = walk_expr(c, std::move(env));
    return env;
  }

  std::unordered_map<std::string, int> var_ids_;
  std::unordered_map<std::string, int> occurrence_counter_;
  std::unordered_map<const AstNode*, int> node_occurrence_;
  std::set<DataflowEdge> edges_;
};

}  // namespace

DataflowGraph extract_dataflow(const SyntaxTree& tree) { return Extractor().run(tree.root); }

}  // namespace cverepair::metric
