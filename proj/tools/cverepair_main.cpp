// cverepair — vulnerability-repair pipeline front end.
//
// Subcommands:
//   ingest      extract a paired C corpus from a CVEFixes-style database
//   run         execute a configured repair batch (live, --record, or --replay)
//   score       score an outcome file against its corpus ground truth
//   report      aggregate evaluation rows into a report
//   score-pair  CodeBLEU between two files, JSON to stdout
//   apply       splice a patch over one function in a real source file

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "cverepair/corpus.hpp"
#include "cverepair/errors.hpp"
#include "cverepair/eval.hpp"
#include "cverepair/metric.hpp"
#include "cverepair/pipeline.hpp"
#include "cverepair/runconfig.hpp"

namespace fs = std::filesystem;
using namespace cverepair;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_ingest(const std::string& db_path, const std::string& out_path,
               corpus::CorpusFilter filter) {
  if (!fs::exists(db_path)) {
    std::cerr << "error: database not found: " << db_path << "\n";
    return 1;
  }
  const std::vector<corpus::VulnRecord> records = corpus::ingest_database(db_path, filter);
  corpus::write_corpus_file(out_path, records);

  // Sidecar metadata so token counts stay reproducible.
  nlohmann::json meta;
  meta["source_database"] = db_path;
  meta["language"] = filter.target_language;
  meta["tokenizer"] = filter.tokenizer_id;
  meta["token_limit"] = filter.token_limit;
  meta["excluded_cwes"] = filter.excluded_cwes;
  meta["min_pairs_per_cwe"] = filter.min_pairs_per_cwe;
  meta["records"] = records.size();
  std::ofstream meta_out(out_path + ".meta.json");
  meta_out << meta.dump(2) << "\n";

  std::cout << "cwe_id,count\n";
  for (const auto& [cwe, count] : corpus::cwe_frequency(records)) {
    std::cout << cwe << "," << count << "\n";
  }
  std::cerr << "wrote " << records.size() << " records to " << out_path << "\n";
  return 0;
}

// Flag overrides applied on top of the loaded config file.
struct RunOverrides {
  std::string corpus, output_dir, config_label, tokenizer;
  int iteration_limit = -1;
  double divergence_threshold = -1.0;
  double sample_fraction = -1.0;
  long long sample_seed = -1;
  int parallelism = -1;
};

int cmd_run(const std::string& config_path, const RunOverrides& ov,
            std::optional<std::string> replay, std::optional<std::string> record,
            std::optional<std::string> out_override) {
  cli::RunConfig config = cli::RunConfig::load(config_path);
  if (!ov.corpus.empty()) config.corpus_path = ov.corpus;
  if (!ov.output_dir.empty()) config.output_dir = ov.output_dir;
  if (!ov.config_label.empty()) {
    config.pipeline.label = pipeline::config_label_from_name(ov.config_label);
  }
  if (!ov.tokenizer.empty()) config.pipeline.tokenizer_id = ov.tokenizer;
  if (ov.iteration_limit > 0) config.pipeline.iteration_limit = ov.iteration_limit;
  if (ov.divergence_threshold > 0.0) {
    config.pipeline.divergence_threshold = ov.divergence_threshold;
  }
  if (ov.sample_fraction > 0.0) config.sample_fraction = ov.sample_fraction;
  if (ov.sample_seed >= 0) config.sample_seed = static_cast<std::uint64_t>(ov.sample_seed);
  if (ov.parallelism > 0) config.parallelism = ov.parallelism;
  fs::create_directories(config.output_dir);

  // Resolved config copy for provenance.
  std::ofstream snap(fs::path(config.output_dir) / "run_config.json");
  snap << config.to_json().dump(2) << "\n";

  const std::string outcome_path =
      out_override.value_or((fs::path(config.output_dir) / "outcomes.jsonl").string());

  const cli::RunStats stats = cli::run_batch(config, outcome_path, replay, record,
                                             [](const std::string& w) {
                                               std::cerr << "warning: " << w << "\n";
                                             });
  std::cerr << "attempted " << stats.attempted << ", resumed past " << stats.skipped_resume
            << ", failed " << stats.failed << " (outcomes: " << outcome_path << ")\n";
  return 0;
}

int cmd_score(const std::string& outcomes_path, const std::string& corpus_path,
              const std::string& out_path, const metric::MetricConfig& metric_config) {
  const auto outcomes = pipeline::read_outcome_file(outcomes_path);
  const auto records = corpus::read_corpus_file(corpus_path);

  std::map<std::pair<std::string, std::string>, const corpus::VulnRecord*> by_key;
  for (const auto& r : records) by_key[{r.cve_id, r.function_name}] = &r;

  std::vector<eval::EvaluationRow> rows;
  for (const auto& o : outcomes) {
    if (!o.error.empty()) continue;  // per-record failures carry no patch to score
    auto it = by_key.find({o.cve_id, o.function_name});
    if (it == by_key.end()) {
      throw Error("outcome record missing from corpus: " + o.cve_id + "/" + o.function_name);
    }
    rows.push_back(eval::score_against_ground_truth(o, *it->second, metric_config));
  }
  eval::write_rows_file(out_path, rows);
  std::cerr << "scored " << rows.size() << " outcomes to " << out_path << "\n";
  return 0;
}

int cmd_report(const std::string& rows_path, const std::string& format,
               const std::string& group_by, std::optional<std::string> out_path) {
  const auto rows = eval::read_rows_file(rows_path);
  const eval::ReportFormat fmt = eval::report_format_from_name(format);
  const eval::Grouping grouping = eval::grouping_from_name(group_by);

  std::string text;
  if (rows.empty()) {
    // Header-only output for an empty evaluation.
    eval::Report empty;
    empty.grouping = grouping;
    text = eval::emit_report(empty, fmt);
  } else {
    text = eval::emit_report(eval::aggregate(rows, grouping), fmt);
  }

  if (out_path) {
    std::ofstream out(*out_path, std::ios::trunc);
    if (!out) throw Error("cannot write report: " + *out_path);
    out << text;
    std::cerr << "wrote report to " << *out_path << "\n";
  } else {
    std::cout << text;
  }
  return 0;
}

int cmd_score_pair(const std::string& candidate_path, const std::string& reference_path,
                   const metric::MetricConfig& metric_config) {
  const metric::SimilarityBreakdown b =
      metric::codebleu(read_file(candidate_path), read_file(reference_path), metric_config);
  std::cout << metric::breakdown_to_json(b).dump() << "\n";
  return 0;
}

int cmd_apply(const std::string& source_path, const std::string& function_name,
              const std::string& patch_path, bool in_place,
              std::optional<std::string> build_cmd) {
  const eval::ApplyResult result = eval::apply_patch_file(
      source_path, function_name, read_file(patch_path), in_place, build_cmd);
  std::cerr << "wrote " << result.output_path << "\n";
  if (result.build_exit) {
    std::cerr << "build command exited with status " << *result.build_exit << "\n";
    return *result.build_exit == 0 ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM-driven C vulnerability repair pipeline"};
  app.require_subcommand(1);

  // ---- ingest ----
  auto* ingest = app.add_subcommand("ingest", "Extract a paired corpus from a CVEFixes DB");
  std::string db_path;
  std::string ingest_out = "corpus.jsonl";
  corpus::CorpusFilter filter;
  std::vector<std::string> exclude_cwe_flags;
  ingest->add_option("database", db_path, "SQLite database path")->required();
  ingest->add_option("-o,--out", ingest_out, "Corpus output path (JSONL)");
  ingest->add_option("--language", filter.target_language, "Target language tag");
  ingest->add_option("--limit-tokens", filter.token_limit, "Max tokens per snippet");
  ingest->add_option("--exclude-cwe", exclude_cwe_flags,
                     "CWE label to exclude (repeatable; replaces defaults)");
  ingest->add_option("--min-pairs-per-cwe", filter.min_pairs_per_cwe,
                     "Drop CWEs with fewer pairs");
  ingest->add_option("--tokenizer", filter.tokenizer_id, "Token counting scheme");

  // ---- run ----
  auto* run = app.add_subcommand("run", "Execute a configured repair batch");
  std::string run_config_path;
  std::string replay_path, record_path, run_out;
  RunOverrides ov;
  run->add_option("-c,--config", run_config_path, "Run config JSON")->required();
  run->add_option("--replay", replay_path, "Replay responses from a cassette");
  run->add_option("--record", record_path, "Record responses to a cassette");
  run->add_option("-o,--out", run_out, "Outcome file override");
  run->add_option("--corpus", ov.corpus, "Override: corpus path");
  run->add_option("--output-dir", ov.output_dir, "Override: output directory");
  run->add_option("--config-label", ov.config_label,
                  "Override: unguided | guided | guided_feedback");
  run->add_option("--iteration-limit", ov.iteration_limit, "Override: iteration limit");
  run->add_option("--divergence-threshold", ov.divergence_threshold,
                  "Override: divergence threshold");
  run->add_option("--sample-fraction", ov.sample_fraction, "Override: corpus sample fraction");
  run->add_option("--sample-seed", ov.sample_seed, "Override: sampling seed");
  run->add_option("--parallelism", ov.parallelism, "Override: worker count");
  run->add_option("--tokenizer", ov.tokenizer, "Override: token counting scheme");

  // ---- score ----
  auto* score = app.add_subcommand("score", "Score outcomes against ground truth");
  std::string score_outcomes, score_corpus, score_out = "rows.jsonl";
  score->add_option("--outcomes", score_outcomes, "Outcome file (JSONL)")->required();
  score->add_option("--corpus", score_corpus, "Corpus file (JSONL)")->required();
  score->add_option("-o,--out", score_out, "Evaluation rows output path");

  // ---- report ----
  auto* report = app.add_subcommand("report", "Aggregate evaluation rows");
  std::string report_rows, report_format = "markdown", report_group = "model";
  std::string report_out;
  report->add_option("--rows", report_rows, "Evaluation rows file")->required();
  report->add_option("--format", report_format, "json | csv | markdown");
  report->add_option("--group-by", report_group, "model | cwe");
  report->add_option("-o,--out", report_out, "Report output path (default stdout)");

  // ---- score-pair ----
  auto* pair = app.add_subcommand("score-pair", "CodeBLEU between two files");
  std::string pair_candidate, pair_reference;
  std::vector<double> pair_weights;
  pair->add_option("candidate", pair_candidate, "Candidate file")->required();
  pair->add_option("reference", pair_reference, "Reference file")->required();
  pair->add_option("--weights", pair_weights,
                   "Four component weights (ngram, weighted, ast, dataflow)")
      ->expected(4);

  // ---- apply ----
  auto* apply = app.add_subcommand("apply", "Splice a patch into a source file");
  std::string apply_source, apply_function, apply_patch_path, apply_build;
  bool apply_in_place = false;
  apply->add_option("source", apply_source, "C source file")->required();
  apply->add_option("function", apply_function, "Function to replace")->required();
  apply->add_option("--patch-file", apply_patch_path, "File holding the replacement function")
      ->required();
  apply->add_flag("--in-place", apply_in_place,
                  "Overwrite the source instead of writing a .patched sibling");
  apply->add_option("--build-cmd", apply_build,
                    "Shell command to run after patching; its exit status is reported");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      if (!exclude_cwe_flags.empty()) {
        filter.excluded_cwes =
            std::set<std::string>(exclude_cwe_flags.begin(), exclude_cwe_flags.end());
      }
      return cmd_ingest(db_path, ingest_out, filter);
    }
    if (*run) {
      return cmd_run(run_config_path, ov,
                     replay_path.empty() ? std::nullopt : std::optional(replay_path),
                     record_path.empty() ? std::nullopt : std::optional(record_path),
                     run_out.empty() ? std::nullopt : std::optional(run_out));
    }
    if (*score) {
      return cmd_score(score_outcomes, score_corpus, score_out, metric::MetricConfig{});
    }
    if (*report) {
      return cmd_report(report_rows, report_format, report_group,
                        report_out.empty() ? std::nullopt : std::optional(report_out));
    }
    if (*pair) {
      metric::MetricConfig cfg;
      if (pair_weights.size() == 4) {
        for (std::size_t i = 0; i < 4; ++i) cfg.weights[i] = pair_weights[i];
      }
      return cmd_score_pair(pair_candidate, pair_reference, cfg);
    }
    if (*apply) {
      return cmd_apply(apply_source, apply_function, apply_patch_path, apply_in_place,
                       apply_build.empty() ? std::nullopt : std::optional(apply_build));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
