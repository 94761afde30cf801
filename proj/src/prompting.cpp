#include "cverepair/prompting.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "cverepair/errors.hpp"

namespace cverepair::prompting {
namespace {

const char kSystemTemplate[] =
    "You are an expert C developer. You repair security vulnerabilities in C "
    "functions taken from real-world projects.\n";

const char kRequirements[] =
    "Requirements:\n"
    "- Produce compilable C code with proper syntax.\n"
    "- Make the minimal amount of changes required to fix the target bug.\n"
    "- Synthesize all modifications yourself; do not ask for user input.\n"
    "- Reply with the complete repaired function in a single fenced code block "
    "delimited by ```c and ```.\n";

std::string unguided_template() {
  std::string t =
      "The following C function contains a bug. Repair it.\n"
      "\n"
      "```c\n"
      "{code}\n"
      "```\n"
      "\n";
  t += kRequirements;
  return t;
}

std::string guided_template() {
  std::string t =
      "The following C function contains a bug. Repair it.\n"
      "\n"
      "```c\n"
      "{code}\n"
      "```\n"
      "\n"
      "Vulnerability context:\n"
      "- CVE: {cve_id}\n"
      "- CVE description: {cve_description}\n"
      "- CWE: {cwe_id}\n"
      "- CWE description: {cwe_description}\n"
      "\n";
  t += kRequirements;
  return t;
}

std::string feedback_template() {
  std::string t =
      "Here is the current candidate repair:\n"
      "\n"
      "```c\n"
      "{code}\n"
      "```\n"
      "\n"
      "Automated review of the candidate:\n"
      "{diagnostics}\n"
      "\n"
      "Revise the candidate accordingly.\n"
      "\n";
  t += kRequirements;
  return t;
}

// Single-pass placeholder substitution; values are never re-scanned, so
// code containing brace patterns cannot inject placeholders.
std::string substitute(std::string_view tmpl,
                       const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const std::size_t close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        const std::string name(tmpl.substr(i + 1, close - i - 1));
        auto it = values.find(name);
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i];
    ++i;
  }
  return out;
}

std::string read_file_or_throw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read template file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string render_diagnostics(const FeedbackDiagnostics& d) {
  std::string out;
  if (d.empty_patch) {
    out += "- No code could be extracted from the previous response.\n";
  }
  if (d.parse_failed) {
    out += "- The candidate is not valid C code.\n";
  }
  if (d.excessive_change) {
    out +=
        "- The candidate differs too much from the original function; the repair "
        "may be incorrect. Keep changes minimal.\n";
  }
  if (out.empty()) {
    out =
        "- No issues were detected automatically. Confirm the repair and refine "
        "it only if needed.\n";
  }
  if (out.back() == '\n') out.pop_back();
  return out;
}

}  // namespace

PromptTemplates PromptTemplates::builtin() {
  PromptTemplates t;
  t.system = kSystemTemplate;
  t.unguided = unguided_template();
  t.guided = guided_template();
  t.feedback = feedback_template();
  return t;
}

PromptTemplates PromptTemplates::load(const std::string& directory) {
  PromptTemplates t;
  t.system = read_file_or_throw(directory + "/system.txt");
  t.unguided = read_file_or_throw(directory + "/unguided.txt");
  t.guided = read_file_or_throw(directory + "/guided.txt");
  t.feedback = read_file_or_throw(directory + "/feedback.txt");
  return t;
}

PromptRenderer::PromptRenderer(PromptTemplates templates, TokenCounter counter)
    : templates_(std::move(templates)), counter_(std::move(counter)) {}

RenderedPrompt PromptRenderer::finish(std::string user_text, PromptKind kind) const {
  RenderedPrompt p;
  p.system_text = templates_.system;
  p.user_text = std::move(user_text);
  p.kind = kind;
  p.token_count = counter_.count(p.system_text) + counter_.count(p.user_text);
  return p;
}

RenderedPrompt PromptRenderer::render_unguided(std::string_view code) const {
  if (code.empty()) throw ConfigError("render_unguided: code is empty");
  return finish(substitute(templates_.unguided, {{"code", std::string(code)}}),
                PromptKind::Unguided);
}

RenderedPrompt PromptRenderer::render_guided(std::string_view code,
                                             const PromptContext& ctx) const {
  if (code.empty()) throw ConfigError("render_guided: code is empty");
  if (ctx.cve_id.empty() || ctx.cve_description.empty() || ctx.cwe_id.empty() ||
      ctx.cwe_description.empty()) {
    throw ConfigError("render_guided: incomplete prompt context");
  }
  return finish(substitute(templates_.guided, {{"code", std::string(code)},
                                               {"cve_id", ctx.cve_id},
                                               {"cve_description", ctx.cve_description},
                                               {"cwe_id", ctx.cwe_id},
                                               {"cwe_description", ctx.cwe_description}}),
                PromptKind::Guided);
}

RenderedPrompt PromptRenderer::render_feedback(std::string_view previous_code,
                                               const FeedbackDiagnostics& diagnostics) const {
  return finish(substitute(templates_.feedback,
                           {{"code", std::string(previous_code)},
                            {"diagnostics", render_diagnostics(diagnostics)}}),
                PromptKind::Feedback);
}

BudgetCheck budget_check(const RenderedPrompt& prompt, std::size_t budget) {
  if (budget == 0) throw ConfigError("budget must be > 0");
  return {prompt.token_count <= budget, prompt.token_count, budget};
}

const char* prompt_kind_name(PromptKind kind) {
  switch (kind) {
    case PromptKind::Unguided: return "unguided";
    case PromptKind::Guided: return "guided";
    case PromptKind::Feedback: return "feedback";
  }
  return "unknown";
}

}  // namespace cverepair::prompting
