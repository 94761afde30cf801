#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cverepair/metric.hpp"
#include "cverepair/pipeline.hpp"
#include "cverepair/record.hpp"

namespace cverepair::eval {

// One scored repair: candidate vs ground truth, plus the before-vs-after
// baseline computed with the identical metric configuration.
struct EvaluationRow {
  std::string cve_id;
  std::string cwe_id;
  std::string function_name;
  std::string model;
  std::string config_label;
  metric::SimilarityBreakdown similarity;
  metric::SimilarityBreakdown baseline_similarity;
  bool absent_patch = false;  // no patch was produced; scored as 0
  int pass_k = 1;
};

enum class Grouping { ModelConfig, CweConfig };

const char* grouping_name(Grouping g);
Grouping grouping_from_name(const std::string& name);

struct ReportGroup {
  std::string key;  // model name or CWE id
  std::string config_label;
  std::size_t count = 0;
  double mean_similarity = 0.0;
  double mean_baseline = 0.0;
  double improvement = 0.0;  // (mean_similarity - mean_baseline) / mean_baseline

  bool operator==(const ReportGroup&) const = default;
};

struct Report {
  Grouping grouping = Grouping::ModelConfig;
  std::vector<ReportGroup> groups;  // sorted by (key, config_label)
  std::size_t total_rows = 0;

  bool operator==(const Report&) const = default;
};

// Scores one outcome against its record. The record must match the
// outcome's (cve_id, function_name). Outcomes without a patch score zero
// across the board and carry the absent-patch marker.
EvaluationRow score_against_ground_truth(const pipeline::RepairOutcome& outcome,
                                         const corpus::VulnRecord& record,
                                         const metric::MetricConfig& config = {});

// Arithmetic means per group plus the relative improvement statistic.
// Throws on empty input.
Report aggregate(const std::vector<EvaluationRow>& rows, Grouping grouping);

// Replaces the unique definition of function_name (signature through its
// balanced closing brace) with patch, leaving every other byte of the file
// unchanged. Lexical and comment/string aware; no parsing, so files with
// preprocessor noise work. Throws PatchError.
std::string apply_patch(const std::string& source_file, const std::string& function_name,
                        const std::string& patch);

struct ApplyResult {
  std::string output_path;        // written file (.patched sibling unless in place)
  std::optional<int> build_exit;  // exit status of the user build command, if any
};

// File-level wrapper over apply_patch: reads source_path, splices the
// patch, and writes the result next to the original with a ".patched"
// suffix (or over it when in_place). When build_command is given it is run
// afterwards with the shell and only its exit status is reported.
ApplyResult apply_patch_file(const std::string& source_path, const std::string& function_name,
                             const std::string& patch_text, bool in_place,
                             const std::optional<std::string>& build_command);

enum class ReportFormat { Json, Csv, Markdown };

ReportFormat report_format_from_name(const std::string& name);

// Deterministic, lossless rendering (groups ordered by key ascending).
std::string emit_report(const Report& report, ReportFormat format);

// Inverse of emit_report for the CSV form.
Report parse_report_csv(const std::string& text);

nlohmann::json row_to_json(const EvaluationRow& row);
EvaluationRow row_from_json(const nlohmann::json& j);

std::vector<EvaluationRow> read_rows_file(const std::string& path);
void write_rows_file(const std::string& path, const std::vector<EvaluationRow>& rows);

}  // namespace cverepair::eval
