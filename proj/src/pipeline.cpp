#include "cverepair/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "cverepair/errors.hpp"

namespace cverepair::pipeline {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// ---- fenced block extraction ---------------------------------------------

// Returns the contents of the first properly closed fenced block, if any.
std::optional<std::string> first_fenced_block(const std::string& text) {
  std::size_t search = 0;
  while (true) {
    const std::size_t open = text.find("```", search);
    if (open == std::string::npos) return std::nullopt;

    std::size_t content_start = open + 3;
    // Optional info string up to end of line.
    const std::size_t eol = text.find('\n', content_start);
    if (eol == std::string::npos) return std::nullopt;  // nothing after the fence
    content_start = eol + 1;

    const std::size_t close = text.find("```", content_start);
    if (close == std::string::npos) return std::nullopt;  // unclosed fence

    std::string content = text.substr(content_start, close - content_start);
    if (!content.empty() && content.back() == '\n') content.pop_back();
    if (!content.empty() && content.back() == '\r') content.pop_back();
    if (!trim(content).empty()) return content;
    search = close + 3;  // empty block: keep looking
  }
}

// ---- unfenced recovery ------------------------------------------------------

bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool is_control_keyword(std::string_view word) {
  return word == "if" || word == "while" || word == "for" || word == "switch" ||
         word == "return" || word == "sizeof" || word == "do" || word == "else";
}

// Steps over string/char literals and comments; returns the next index.
std::size_t skip_opaque(const std::string& t, std::size_t i) {
  if (t[i] == '"' || t[i] == '\'') {
    const char q = t[i];
    ++i;
    while (i < t.size() && t[i] != q) {
      if (t[i] == '\\' && i + 1 < t.size()) ++i;
      if (t[i] == '\n') break;  // unterminated literal: bail at EOL
      ++i;
    }
    return i < t.size() ? i + 1 : i;
  }
  if (t[i] == '/' && i + 1 < t.size() && t[i + 1] == '/') {
    while (i < t.size() && t[i] != '\n') ++i;
    return i;
  }
  if (t[i] == '/' && i + 1 < t.size() && t[i + 1] == '*') {
    i += 2;
    while (i + 1 < t.size() && !(t[i] == '*' && t[i + 1] == '/')) ++i;
    return i + 1 < t.size() ? i + 2 : t.size();
  }
  return i + 1;
}

// Scans forward from an opening delimiter, returning the index just past
// the balanced closer, or npos.
std::size_t scan_balanced(const std::string& t, std::size_t i, char open, char close) {
  int depth = 0;
  while (i < t.size()) {
    const char c = t[i];
    if (c == '"' || c == '\'' || c == '/') {
      i = skip_opaque(t, i);
      continue;
    }
    if (c == open) ++depth;
    if (c == close) {
      --depth;
      if (depth == 0) return i + 1;
    }
    ++i;
  }
  return std::string::npos;
}

// Walks back from the function name over return-type words and pointer
// stars ("static unsigned char *"), stopping at anything else.
std::size_t signature_start(const std::string& t, std::size_t name_begin) {
  std::size_t start = name_begin;
  std::size_t cursor = name_begin;
  while (cursor > 0) {
    std::size_t p = cursor;
    while (p > 0 && std::isspace(static_cast<unsigned char>(t[p - 1]))) --p;
    if (p == 0) break;
    if (t[p - 1] == '*') {
      start = p - 1;
      cursor = p - 1;
      continue;
    }
    if (ident_char(t[p - 1])) {
      std::size_t w = p;
      while (w > 0 && ident_char(t[w - 1])) --w;
      start = w;
      cursor = w;
      continue;
    }
    break;
  }
  return start;
}

// Longest brace-balanced region starting at something shaped like a C
// function signature: return-type words, identifier, '(' ... ')', then
// '{' ... matching '}'.
std::optional<std::string> recover_function(const std::string& t) {
  std::optional<std::string> best;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != '(') continue;

    // identifier directly before the parenthesis
    std::size_t e = i;
    while (e > 0 && std::isspace(static_cast<unsigned char>(t[e - 1]))) --e;
    std::size_t b = e;
    while (b > 0 && ident_char(t[b - 1])) --b;
    if (b == e) continue;
    const std::string_view name(t.data() + b, e - b);
    if (is_control_keyword(name) || std::isdigit(static_cast<unsigned char>(t[b]))) continue;

    const std::size_t after_params = scan_balanced(t, i, '(', ')');
    if (after_params == std::string::npos) continue;
    std::size_t j = after_params;
    while (j < t.size() && std::isspace(static_cast<unsigned char>(t[j]))) ++j;
    if (j >= t.size() || t[j] != '{') continue;

    const std::size_t end = scan_balanced(t, j, '{', '}');
    if (end == std::string::npos) continue;

    std::string region =
        trim(std::string_view(t).substr(signature_start(t, b), end - signature_start(t, b)));
    if (!best || region.size() > best->size()) best = std::move(region);
  }
  return best;
}

nlohmann::json patch_to_json(const CandidatePatch& p) {
  nlohmann::json j;
  j["status"] = extraction_status_name(p.status);
  j["code"] = p.code ? nlohmann::json(*p.code) : nlohmann::json(nullptr);
  return j;
}

CandidatePatch patch_from_json(const nlohmann::json& j) {
  CandidatePatch p;
  const std::string status = j.at("status").get<std::string>();
  p.status = status == "well_formed" ? ExtractionStatus::WellFormed
             : status == "recovered" ? ExtractionStatus::Recovered
                                     : ExtractionStatus::None;
  if (!j.at("code").is_null()) p.code = j["code"].get<std::string>();
  return p;
}

nlohmann::json diagnostics_to_json(const DivergenceDiagnostics& d) {
  nlohmann::json j;
  j["codebleu_vs_input"] = d.codebleu_vs_input;
  j["parse_ok"] = d.parse_ok;
  auto flags = nlohmann::json::array();
  if (d.excessive_change) flags.push_back("excessive_change");
  if (d.parse_failed) flags.push_back("parse_failed");
  if (d.empty_patch) flags.push_back("empty_patch");
  j["flags"] = std::move(flags);
  return j;
}

DivergenceDiagnostics diagnostics_from_json(const nlohmann::json& j) {
  DivergenceDiagnostics d;
  d.codebleu_vs_input = j.at("codebleu_vs_input").get<double>();
  d.parse_ok = j.at("parse_ok").get<bool>();
  for (const auto& f : j.at("flags")) {
    const std::string name = f.get<std::string>();
    if (name == "excessive_change") d.excessive_change = true;
    if (name == "parse_failed") d.parse_failed = true;
    if (name == "empty_patch") d.empty_patch = true;
  }
  return d;
}

prompting::PromptKind prompt_kind_from_name(const std::string& name) {
  if (name == "guided") return prompting::PromptKind::Guided;
  if (name == "feedback") return prompting::PromptKind::Feedback;
  return prompting::PromptKind::Unguided;
}

}  // namespace

const char* config_label_name(ConfigLabel label) {
  switch (label) {
    case ConfigLabel::Unguided: return "unguided";
    case ConfigLabel::Guided: return "guided";
    case ConfigLabel::GuidedFeedback: return "guided_feedback";
  }
  return "unknown";
}

ConfigLabel config_label_from_name(const std::string& name) {
  if (name == "unguided") return ConfigLabel::Unguided;
  if (name == "guided") return ConfigLabel::Guided;
  if (name == "guided_feedback" || name == "guided+feedback") {
    return ConfigLabel::GuidedFeedback;
  }
  throw ConfigError("unknown pipeline configuration: " + name);
}

const char* extraction_status_name(ExtractionStatus s) {
  switch (s) {
    case ExtractionStatus::WellFormed: return "well_formed";
    case ExtractionStatus::Recovered: return "recovered";
    case ExtractionStatus::None: return "none";
  }
  return "unknown";
}

CandidatePatch extract_patch(const std::string& response) {
  if (auto block = first_fenced_block(response)) {
    return {std::move(block), ExtractionStatus::WellFormed};
  }
  if (auto region = recover_function(response)) {
    return {std::move(region), ExtractionStatus::Recovered};
  }
  return {std::nullopt, ExtractionStatus::None};
}

DivergenceDiagnostics assess_divergence(const std::string& input_code,
                                        const CandidatePatch& patch, double threshold,
                                        const metric::MetricConfig& metric_config) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("divergence threshold must be in (0,1)");
  }
  DivergenceDiagnostics d;
  if (!patch.code) {
    d.empty_patch = true;
    return d;
  }
  const metric::SimilarityBreakdown b = metric::codebleu(*patch.code, input_code, metric_config);
  d.codebleu_vs_input = b.composite;
  d.parse_ok = metric::parse_c(*patch.code).parse_ok;
  d.parse_failed = !d.parse_ok;
  d.excessive_change = b.composite < threshold;
  return d;
}

RepairOutcome run_repair(const RepairTask& task, const PipelineConfig& config,
                         llm::Backend& backend, const llm::ModelProfile& profile,
                         const prompting::PromptRenderer& renderer) {
  if (config.iteration_limit < 1) throw ConfigError("iteration_limit must be >= 1");

  RepairOutcome outcome;
  outcome.cve_id = task.cve_id;
  outcome.cwe_id = task.cwe_id;
  outcome.function_name = task.function_name;
  outcome.config_label = config_label_name(config.label);
  outcome.model = profile.name;
  outcome.divergence_threshold = config.divergence_threshold;

  const int iterations =
      config.label == ConfigLabel::GuidedFeedback ? config.iteration_limit : 1;

  llm::ChatSession session{TokenCounter(config.tokenizer_id)};

  for (int i = 0; i < iterations; ++i) {
    IterationRecord it;
    if (i == 0) {
      it.prompt = config.label == ConfigLabel::Unguided
                      ? renderer.render_unguided(task.before_code)
                      : renderer.render_guided(
                            task.before_code,
                            {task.cve_id, task.cve_description, task.cwe_id,
                             task.cwe_description});
      session.push("system", it.prompt.system_text);
    } else {
      const IterationRecord& prev = outcome.iterations.back();
      const std::string& in_progress =
          prev.patch.code ? *prev.patch.code : task.before_code;
      prompting::FeedbackDiagnostics fb;
      fb.excessive_change = prev.diagnostics.excessive_change;
      fb.parse_failed = prev.diagnostics.parse_failed;
      fb.empty_patch = prev.diagnostics.empty_patch;
      it.prompt = renderer.render_feedback(in_progress, fb);
    }

    const prompting::BudgetCheck budget = prompting::budget_check(it.prompt, config.token_budget);
    it.budget_exceeded = !budget.passed;
    if (!budget.passed && config.strict_budget) {
      throw ConfigError("prompt exceeds token budget: " + std::to_string(budget.measured) +
                        " > " + std::to_string(budget.budget));
    }

    session.push("user", it.prompt.user_text);
    it.raw_response = backend.complete(session, profile);
    it.patch = extract_patch(it.raw_response);
    it.diagnostics = assess_divergence(task.before_code, it.patch,
                                       config.divergence_threshold, config.metric);
    outcome.iterations.push_back(std::move(it));
  }

  outcome.final_patch = outcome.iterations.back().patch;
  return outcome;
}

nlohmann::json outcome_to_json(const RepairOutcome& o) {
  nlohmann::json j;
  j["cve_id"] = o.cve_id;
  j["cwe_id"] = o.cwe_id;
  j["function_name"] = o.function_name;
  j["config_label"] = o.config_label;
  j["model"] = o.model;
  j["divergence_threshold"] = o.divergence_threshold;
  j["final_patch"] = patch_to_json(o.final_patch);
  j["error"] = o.error;
  j["started_at"] = o.started_at;
  j["finished_at"] = o.finished_at;
  auto iters = nlohmann::json::array();
  for (const auto& it : o.iterations) {
    nlohmann::json ji;
    ji["prompt"] = {{"kind", prompting::prompt_kind_name(it.prompt.kind)},
                    {"system_text", it.prompt.system_text},
                    {"user_text", it.prompt.user_text},
                    {"token_count", it.prompt.token_count}};
    ji["budget_exceeded"] = it.budget_exceeded;
    ji["raw_response"] = it.raw_response;
    ji["patch"] = patch_to_json(it.patch);
    ji["diagnostics"] = diagnostics_to_json(it.diagnostics);
    iters.push_back(std::move(ji));
  }
  j["iterations"] = std::move(iters);
  return j;
}

RepairOutcome outcome_from_json(const nlohmann::json& j) {
  RepairOutcome o;
  o.cve_id = j.at("cve_id").get<std::string>();
  o.cwe_id = j.at("cwe_id").get<std::string>();
  o.function_name = j.at("function_name").get<std::string>();
  o.config_label = j.at("config_label").get<std::string>();
  o.model = j.at("model").get<std::string>();
  o.divergence_threshold = j.at("divergence_threshold").get<double>();
  o.final_patch = patch_from_json(j.at("final_patch"));
  o.error = j.at("error").get<std::string>();
  o.started_at = j.at("started_at").get<std::int64_t>();
  o.finished_at = j.at("finished_at").get<std::int64_t>();
  for (const auto& ji : j.at("iterations")) {
    IterationRecord it;
    const auto& jp = ji.at("prompt");
    it.prompt.kind = prompt_kind_from_name(jp.at("kind").get<std::string>());
    it.prompt.system_text = jp.at("system_text").get<std::string>();
    it.prompt.user_text = jp.at("user_text").get<std::string>();
    it.prompt.token_count = jp.at("token_count").get<std::size_t>();
    it.budget_exceeded = ji.at("budget_exceeded").get<bool>();
    it.raw_response = ji.at("raw_response").get<std::string>();
    it.patch = patch_from_json(ji.at("patch"));
    it.diagnostics = diagnostics_from_json(ji.at("diagnostics"));
    o.iterations.push_back(std::move(it));
  }
  return o;
}

std::vector<RepairOutcome> read_outcome_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open outcome file: " + path);
  std::vector<RepairOutcome> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(outcome_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error("outcome file " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cverepair::pipeline
