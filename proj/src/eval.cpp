#include "cverepair/eval.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "cverepair/errors.hpp"

namespace cverepair::eval {
namespace {

// ---- lexical file scanning for apply_patch ---------------------------------

bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Steps over string/char literals and comments starting at i.
std::size_t skip_opaque(const std::string& t, std::size_t i) {
  if (t[i] == '"' || t[i] == '\'') {
    const char q = t[i];
    ++i;
    while (i < t.size() && t[i] != q) {
      if (t[i] == '\\' && i + 1 < t.size()) ++i;
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

bool opaque_start(const std::string& t, std::size_t i) {
  if (t[i] == '"' || t[i] == '\'') return true;
  if (t[i] == '/' && i + 1 < t.size() && (t[i + 1] == '/' || t[i + 1] == '*')) return true;
  return false;
}

std::size_t skip_ws_and_comments(const std::string& t, std::size_t i) {
  while (i < t.size()) {
    if (std::isspace(static_cast<unsigned char>(t[i]))) {
      ++i;
    } else if (t[i] == '/' && i + 1 < t.size() && (t[i + 1] == '/' || t[i + 1] == '*')) {
      i = skip_opaque(t, i);
    } else {
      break;
    }
  }
  return i;
}

// Balanced delimiter scan; i points at the opener. Returns one past the
// closer, or npos.
std::size_t scan_balanced(const std::string& t, std::size_t i, char open, char close) {
  int depth = 0;
  while (i < t.size()) {
    if (opaque_start(t, i)) {
      i = skip_opaque(t, i);
      continue;
    }
    if (t[i] == open) ++depth;
    if (t[i] == close && --depth == 0) return i + 1;
    ++i;
  }
  return std::string::npos;
}

enum class MatchResult { NotADefinition, Definition, UnbalancedBraces };

// After the candidate identifier: '(' params ')' [attributes] '{' body '}'.
MatchResult match_definition_tail(const std::string& t, std::size_t i, std::size_t& end_out) {
  i = skip_ws_and_comments(t, i);
  if (i >= t.size() || t[i] != '(') return MatchResult::NotADefinition;
  const std::size_t after_params = scan_balanced(t, i, '(', ')');
  if (after_params == std::string::npos) return MatchResult::NotADefinition;

  i = after_params;
  while (true) {
    i = skip_ws_and_comments(t, i);
    if (i >= t.size()) return MatchResult::NotADefinition;
    if (t[i] == '{') break;
    if (ident_char(t[i])) {  // trailing attribute macro, possibly with parens
      while (i < t.size() && ident_char(t[i])) ++i;
      i = skip_ws_and_comments(t, i);
      if (i < t.size() && t[i] == '(') {
        i = scan_balanced(t, i, '(', ')');
        if (i == std::string::npos) return MatchResult::NotADefinition;
      }
      continue;
    }
    return MatchResult::NotADefinition;
  }

  const std::size_t end = scan_balanced(t, i, '{', '}');
  if (end == std::string::npos) return MatchResult::UnbalancedBraces;
  end_out = end;
  return MatchResult::Definition;
}

struct Definition {
  std::size_t begin;
  std::size_t end;
};

std::vector<Definition> find_definitions(const std::string& t, const std::string& name,
                                         bool& saw_unbalanced) {
  std::vector<Definition> defs;
  saw_unbalanced = false;

  std::size_t pos = 0;
  int paren_depth = 0;
  int brace_depth = 0;
  std::size_t boundary = 0;  // byte after the last top-level terminator
  bool line_only_ws = true;

  while (pos < t.size()) {
    const char c = t[pos];

    if (c == '#' && line_only_ws) {
      // preprocessor directive with continuations
      while (pos < t.size()) {
        if (t[pos] == '\\' && pos + 1 < t.size() && t[pos + 1] == '\n') {
          pos += 2;
          continue;
        }
        if (t[pos] == '\n') break;
        ++pos;
      }
      if (pos < t.size()) ++pos;  // the newline
      if (paren_depth == 0 && brace_depth == 0) boundary = pos;
      line_only_ws = true;
      continue;
    }

    if (opaque_start(t, pos)) {
      pos = skip_opaque(t, pos);
      line_only_ws = false;
      continue;
    }

    if (c == '\n') {
      line_only_ws = true;
      ++pos;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
      continue;
    }
    line_only_ws = false;

    if (ident_char(c) && !std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t end = pos;
      while (end < t.size() && ident_char(t[end])) ++end;
      if (paren_depth == 0 && brace_depth == 0 &&
          t.compare(pos, end - pos, name) == 0) {
        std::size_t def_end = 0;
        const MatchResult m = match_definition_tail(t, end, def_end);
        if (m == MatchResult::Definition) {
          defs.push_back({skip_ws_and_comments(t, boundary), def_end});
          pos = def_end;
          boundary = def_end;
          continue;
        }
        if (m == MatchResult::UnbalancedBraces) saw_unbalanced = true;
      }
      pos = end;
      continue;
    }

    if (c == '(') ++paren_depth;
    if (c == ')') paren_depth = std::max(0, paren_depth - 1);
    if (c == '{') ++brace_depth;
    if (c == '}') {
      brace_depth = std::max(0, brace_depth - 1);
      if (brace_depth == 0 && paren_depth == 0) boundary = pos + 1;
    }
    if (c == ';' && brace_depth == 0 && paren_depth == 0) boundary = pos + 1;
    ++pos;
  }
  return defs;
}

// ---- formatting helpers -----------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

metric::SimilarityBreakdown zero_breakdown(const metric::MetricConfig& config) {
  metric::SimilarityBreakdown b;
  b.weights = config.weights;
  b.ngram = 0.0;
  b.weighted_ngram = 0.0;
  b.ast = 0.0;
  b.dataflow = 0.0;
  b.composite = 0.0;
  return b;
}

}  // namespace

const char* grouping_name(Grouping g) {
  return g == Grouping::ModelConfig ? "model_config" : "cwe_config";
}

Grouping grouping_from_name(const std::string& name) {
  if (name == "model_config" || name == "model") return Grouping::ModelConfig;
  if (name == "cwe_config" || name == "cwe") return Grouping::CweConfig;
  throw ConfigError("unknown grouping: " + name);
}

EvaluationRow score_against_ground_truth(const pipeline::RepairOutcome& outcome,
                                         const corpus::VulnRecord& record,
                                         const metric::MetricConfig& config) {
  if (outcome.cve_id != record.cve_id || outcome.function_name != record.function_name) {
    throw Error("outcome/record mismatch: " + outcome.cve_id + "/" + outcome.function_name +
                " vs " + record.cve_id + "/" + record.function_name);
  }

  EvaluationRow row;
  row.cve_id = record.cve_id;
  row.cwe_id = record.cwe_id;
  row.function_name = record.function_name;
  row.model = outcome.model;
  row.config_label = outcome.config_label;
  row.baseline_similarity = metric::codebleu(record.before_code, record.after_code(), config);

  if (outcome.final_patch.code) {
    row.similarity = metric::codebleu(*outcome.final_patch.code, record.after_code(), config);
  } else {
    row.similarity = zero_breakdown(config);
    row.absent_patch = true;
  }
  return row;
}

Report aggregate(const std::vector<EvaluationRow>& rows, Grouping grouping) {
  if (rows.empty()) throw Error("aggregate: no evaluation rows");

  struct Acc {
    std::size_t count = 0;
    double sim_sum = 0.0;
    double base_sum = 0.0;
  };
  std::map<std::pair<std::string, std::string>, Acc> acc;
  for (const auto& r : rows) {
    const std::string key = grouping == Grouping::ModelConfig ? r.model : r.cwe_id;
    auto& a = acc[{key, r.config_label}];
    ++a.count;
    a.sim_sum += r.similarity.composite;
    a.base_sum += r.baseline_similarity.composite;
  }

  Report report;
  report.grouping = grouping;
  report.total_rows = rows.size();
  for (const auto& [key, a] : acc) {
    ReportGroup g;
    g.key = key.first;
    g.config_label = key.second;
    g.count = a.count;
    g.mean_similarity = a.sim_sum / static_cast<double>(a.count);
    g.mean_baseline = a.base_sum / static_cast<double>(a.count);
    g.improvement = g.mean_baseline != 0.0
                        ? (g.mean_similarity - g.mean_baseline) / g.mean_baseline
                        : 0.0;
    report.groups.push_back(std::move(g));
  }
  return report;
}

std::string apply_patch(const std::string& source_file, const std::string& function_name,
                        const std::string& patch) {
  bool saw_unbalanced = false;
  const std::vector<Definition> defs =
      find_definitions(source_file, function_name, saw_unbalanced);

  if (defs.empty()) {
    if (saw_unbalanced) {
      throw PatchError(PatchError::Kind::BraceMismatch,
                       "unbalanced braces in definition of '" + function_name + "'");
    }
    throw PatchError(PatchError::Kind::NotFound,
                     "function not found: '" + function_name + "'");
  }
  if (defs.size() > 1) {
    throw PatchError(PatchError::Kind::MultipleDefinitions,
                     "multiple definitions of '" + function_name + "' (" +
                         std::to_string(defs.size()) + ")");
  }

  const Definition& d = defs.front();
  std::string out;
  out.reserve(source_file.size() - (d.end - d.begin) + patch.size());
  out.append(source_file, 0, d.begin);
  out.append(patch);
  out.append(source_file, d.end, std::string::npos);
  return out;
}

ApplyResult apply_patch_file(const std::string& source_path, const std::string& function_name,
                             const std::string& patch_text, bool in_place,
                             const std::optional<std::string>& build_command) {
  std::ifstream in(source_path, std::ios::binary);
  if (!in) throw Error("cannot read source file: " + source_path);
  std::ostringstream ss;
  ss << in.rdbuf();

  const std::string patched = apply_patch(ss.str(), function_name, patch_text);

  ApplyResult result;
  result.output_path = in_place ? source_path : source_path + ".patched";
  std::ofstream out(result.output_path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot write patched file: " + result.output_path);
  out << patched;
  out.close();

  if (build_command && !build_command->empty()) {
    const int status = std::system(build_command->c_str());
    result.build_exit = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  return result;
}

ReportFormat report_format_from_name(const std::string& name) {
  if (name == "json") return ReportFormat::Json;
  if (name == "csv") return ReportFormat::Csv;
  if (name == "markdown" || name == "md" || name == "markdown-table") {
    return ReportFormat::Markdown;
  }
  throw ConfigError("unknown report format: " + name);
}

std::string emit_report(const Report& report, ReportFormat format) {
  std::vector<ReportGroup> groups = report.groups;
  std::sort(groups.begin(), groups.end(), [](const ReportGroup& a, const ReportGroup& b) {
    return std::tie(a.key, a.config_label) < std::tie(b.key, b.config_label);
  });

  if (format == ReportFormat::Json) {
    nlohmann::json j;
    j["grouping"] = grouping_name(report.grouping);
    j["total_rows"] = report.total_rows;
    auto arr = nlohmann::json::array();
    for (const auto& g : groups) {
      arr.push_back({{"key", g.key},
                     {"config_label", g.config_label},
                     {"count", g.count},
                     {"mean_similarity", g.mean_similarity},
                     {"mean_baseline", g.mean_baseline},
                     {"improvement", g.improvement}});
    }
    j["groups"] = std::move(arr);
    return j.dump(2) + "\n";
  }

  if (format == ReportFormat::Csv) {
    std::ostringstream out;
    out << "grouping,key,config_label,count,mean_similarity,mean_baseline,improvement\n";
    for (const auto& g : groups) {
      out << grouping_name(report.grouping) << ',' << g.key << ',' << g.config_label << ','
          << g.count << ',' << format_double(g.mean_similarity) << ','
          << format_double(g.mean_baseline) << ',' << format_double(g.improvement) << '\n';
    }
    return out.str();
  }

  // markdown table
  std::ostringstream out;
  const char* key_header = report.grouping == Grouping::ModelConfig ? "model" : "cwe";
  out << "| " << key_header
      << " | config | count | mean_similarity | mean_baseline | improvement |\n"
      << "|---|---|---:|---:|---:|---:|\n";
  for (const auto& g : groups) {
    char sim[32], base[32], imp[32];
    std::snprintf(sim, sizeof(sim), "%.4f", g.mean_similarity);
    std::snprintf(base, sizeof(base), "%.4f", g.mean_baseline);
    std::snprintf(imp, sizeof(imp), "%+.1f%%", g.improvement * 100.0);
    out << "| " << g.key << " | " << g.config_label << " | " << g.count << " | " << sim
        << " | " << base << " | " << imp << " |\n";
  }
  return out.str();
}

Report parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("empty CSV report");
  if (line != "grouping,key,config_label,count,mean_similarity,mean_baseline,improvement") {
    throw Error("unrecognized CSV report header: " + line);
  }

  Report report;
  bool grouping_set = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (fields.size() != 7) throw Error("malformed CSV report row: " + line);

    if (!grouping_set) {
      report.grouping = grouping_from_name(fields[0]);
      grouping_set = true;
    }
    ReportGroup g;
    g.key = fields[1];
    g.config_label = fields[2];
    g.count = static_cast<std::size_t>(std::stoull(fields[3]));
    g.mean_similarity = std::stod(fields[4]);
    g.mean_baseline = std::stod(fields[5]);
    g.improvement = std::stod(fields[6]);
    report.total_rows += g.count;
    report.groups.push_back(std::move(g));
  }
  return report;
}

nlohmann::json row_to_json(const EvaluationRow& row) {
  nlohmann::json j;
  j["cve_id"] = row.cve_id;
  j["cwe_id"] = row.cwe_id;
  j["function_name"] = row.function_name;
  j["model"] = row.model;
  j["config_label"] = row.config_label;
  j["similarity"] = metric::breakdown_to_json(row.similarity);
  j["baseline_similarity"] = metric::breakdown_to_json(row.baseline_similarity);
  j["absent_patch"] = row.absent_patch;
  j["pass_k"] = row.pass_k;
  return j;
}

EvaluationRow row_from_json(const nlohmann::json& j) {
  EvaluationRow row;
  row.cve_id = j.at("cve_id").get<std::string>();
  row.cwe_id = j.at("cwe_id").get<std::string>();
  row.function_name = j.at("function_name").get<std::string>();
  row.model = j.at("model").get<std::string>();
  row.config_label = j.at("config_label").get<std::string>();
  row.similarity = metric::breakdown_from_json(j.at("similarity"));
  row.baseline_similarity = metric::breakdown_from_json(j.at("baseline_similarity"));
  row.absent_patch = j.at("absent_patch").get<bool>();
  row.pass_k = j.at("pass_k").get<int>();
  return row;
}

std::vector<EvaluationRow> read_rows_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open rows file: " + path);
  std::vector<EvaluationRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(row_from_json(nlohmann::json::parse(line)));
  }
  return rows;
}

void write_rows_file(const std::string& path, const std::vector<EvaluationRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write rows file: " + path);
  for (const auto& r : rows) out << row_to_json(r).dump() << '\n';
}

}  // namespace cverepair::eval
