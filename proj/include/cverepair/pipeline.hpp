#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cverepair/llm.hpp"
#include "cverepair/metric.hpp"
#include "cverepair/prompting.hpp"
#include "cverepair/record.hpp"

namespace cverepair::pipeline {

enum class ConfigLabel { Unguided, Guided, GuidedFeedback };

const char* config_label_name(ConfigLabel label);
ConfigLabel config_label_from_name(const std::string& name);

// Everything the repair loop may know about a record. The ground-truth
// fixed code is deliberately not part of this view.
struct RepairTask {
  std::string cve_id;
  std::string cwe_id;
  std::string function_name;
  std::string before_code;
  std::string cve_description;
  std::string cwe_description;

  static RepairTask from_record(const corpus::VulnRecord& r) {
    return {r.cve_id, r.cwe_id, r.function_name, r.before_code, r.cve_description,
            r.cwe_description};
  }
};

enum class ExtractionStatus { WellFormed, Recovered, None };

const char* extraction_status_name(ExtractionStatus s);

struct CandidatePatch {
  std::optional<std::string> code;
  ExtractionStatus status = ExtractionStatus::None;
};

struct DivergenceDiagnostics {
  double codebleu_vs_input = 0.0;
  bool parse_ok = false;
  bool excessive_change = false;
  bool parse_failed = false;
  bool empty_patch = false;

  bool any_flag() const { return excessive_change || parse_failed || empty_patch; }
};

struct IterationRecord {
  prompting::RenderedPrompt prompt;
  bool budget_exceeded = false;
  std::string raw_response;
  CandidatePatch patch;
  DivergenceDiagnostics diagnostics;
};

struct PipelineConfig {
  ConfigLabel label = ConfigLabel::Guided;
  int iteration_limit = 2;
  double divergence_threshold = 0.35;
  metric::MetricConfig metric;
  std::string tokenizer_id = "builtin";
  std::size_t token_budget = 500;
  bool strict_budget = false;
};

struct RepairOutcome {
  std::string cve_id;
  std::string cwe_id;
  std::string function_name;
  std::string config_label;
  std::string model;
  double divergence_threshold = 0.35;
  CandidatePatch final_patch;
  std::vector<IterationRecord> iterations;
  std::string error;  // non-empty when the backend aborted this record
  std::int64_t started_at = 0;
  std::int64_t finished_at = 0;
};

// Pulls the candidate patch out of a raw model response. First preference
// is the first fenced code block; failing that, the longest brace-balanced
// region that starts at something shaped like a C function signature
// (status Recovered); else status None. Total: never throws.
CandidatePatch extract_patch(const std::string& response);

// Scores the patch against the vulnerable input (never the ground truth;
// the fixed code is not reachable from this module) and derives flags:
// empty_patch for status None, parse_failed when the patch does not parse,
// excessive_change when composite CodeBLEU(patch, input) < threshold.
DivergenceDiagnostics assess_divergence(const std::string& input_code,
                                        const CandidatePatch& patch, double threshold,
                                        const metric::MetricConfig& metric_config = {});

// Runs the bounded repair loop for one record. Unguided/guided execute one
// iteration; guided_feedback executes iteration_limit iterations, feeding
// divergence diagnostics back in the same chat session, and the last
// iteration's patch is final. Backend errors propagate to the caller.
RepairOutcome run_repair(const RepairTask& task, const PipelineConfig& config,
                         llm::Backend& backend, const llm::ModelProfile& profile,
                         const prompting::PromptRenderer& renderer);

nlohmann::json outcome_to_json(const RepairOutcome& o);
RepairOutcome outcome_from_json(const nlohmann::json& j);

// Outcome files hold one RepairOutcome JSON object per line.
std::vector<RepairOutcome> read_outcome_file(const std::string& path);

}  // namespace cverepair::pipeline
