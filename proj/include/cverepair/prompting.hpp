#pragma once

#include <set>
#include <string>
#include <string_view>

#include "cverepair/tokenizer.hpp"

namespace cverepair::prompting {

enum class PromptKind { Unguided, Guided, Feedback };

// Vulnerability context embedded by the guided prompt.
struct PromptContext {
  std::string cve_id;
  std::string cve_description;
  std::string cwe_id;
  std::string cwe_description;
};

struct RenderedPrompt {
  std::string system_text;
  std::string user_text;
  std::size_t token_count = 0;
  PromptKind kind = PromptKind::Unguided;
};

// Divergence flags rendered into feedback prompts. Mirrors
// pipeline::DivergenceFlag without depending on it.
struct FeedbackDiagnostics {
  bool excessive_change = false;
  bool parse_failed = false;
  bool empty_patch = false;

  bool any() const { return excessive_change || parse_failed || empty_patch; }
};

// Template set with {code}, {cve_id}, {cve_description}, {cwe_id},
// {cwe_description}, {diagnostics} placeholders. Loadable from a directory
// holding system.txt, unguided.txt, guided.txt, feedback.txt; builtin()
// returns the shipped defaults (identical to the templates/ directory).
struct PromptTemplates {
  std::string system;
  std::string unguided;
  std::string guided;
  std::string feedback;

  static PromptTemplates builtin();
  static PromptTemplates load(const std::string& directory);
};

class PromptRenderer {
public:
  explicit PromptRenderer(PromptTemplates templates = PromptTemplates::builtin(),
                          TokenCounter counter = TokenCounter("builtin"));

  // Repair instruction only; contains no CVE/CWE material.
  RenderedPrompt render_unguided(std::string_view code) const;

  // Repair instruction plus the four context fields; all must be non-empty.
  RenderedPrompt render_guided(std::string_view code, const PromptContext& ctx) const;

  // Embeds the in-progress code and a textual rendering of each flag; with
  // no flags set it asks for a confirmation-pass refinement.
  RenderedPrompt render_feedback(std::string_view previous_code,
                                 const FeedbackDiagnostics& diagnostics) const;

  const PromptTemplates& templates() const { return templates_; }

private:
  RenderedPrompt finish(std::string user_text, PromptKind kind) const;

  PromptTemplates templates_;
  TokenCounter counter_;
};

struct BudgetCheck {
  bool passed = false;
  std::size_t measured = 0;
  std::size_t budget = 0;
};

// Inclusive boundary: a prompt measuring exactly the budget passes.
BudgetCheck budget_check(const RenderedPrompt& prompt, std::size_t budget);

const char* prompt_kind_name(PromptKind kind);

}  // namespace cverepair::prompting
