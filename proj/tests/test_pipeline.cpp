#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cverepair/errors.hpp"
#include "cverepair/pipeline.hpp"

using namespace cverepair;
using namespace cverepair::pipeline;

namespace {

// Backend scripted with a fixed list of responses; never touches HTTP.
class ScriptedBackend : public llm::Backend {
public:
  explicit ScriptedBackend(std::vector<std::string> responses)
      : responses_(std::move(responses)) {}

  int calls() const { return calls_; }
  const std::vector<std::vector<llm::ChatMessage>>& requests() const { return requests_; }

  std::string fetch(const llm::ModelProfile&,
                    const std::vector<llm::ChatMessage>& messages) override {
    requests_.push_back(messages);
    if (static_cast<std::size_t>(calls_) >= responses_.size()) {
      throw TransportError("script exhausted");
    }
    return responses_[calls_++];
  }

private:
  std::vector<std::string> responses_;
  int calls_ = 0;
  std::vector<std::vector<llm::ChatMessage>> requests_;
};

RepairTask fixture_task() {
  RepairTask t;
  t.cve_id = "CVE-2020-12141";
  t.cwe_id = "CWE-125";
  t.function_name = "snmp_ber_decode_type";
  t.before_code =
      "unsigned char * snmp_ber_decode_type(unsigned char *buff, uint32_t *buff_len, "
      "uint8_t *type)\n{\n  if(*buff_len == 0) {\n    return NULL;\n  }\n\n  *type = "
      "*buff++;\n  (*buff_len)--;\n\n  return buff;\n}\n";
  t.cve_description = "Out-of-bounds read in the BER decoder.";
  t.cwe_description = "Out-of-bounds Read";
  return t;
}

const char* kGoodResponse =
    "Here is the repair.\n\n```c\nunsigned char * snmp_ber_decode_type(unsigned char "
    "*buff, uint32_t *buff_len, uint8_t *type)\n{\n  if(buff == NULL || buff_len == NULL "
    "|| type == NULL || *buff_len == 0) {\n    return NULL;\n  }\n\n  *type = *buff++;\n  "
    "(*buff_len)--;\n\n  return buff;\n}\n```\n";

llm::ModelProfile profile() { return llm::ModelProfile::builtin("gpt-4o"); }

}  // namespace

TEST_CASE("extraction fixture set reproduces hand-labeled outputs") {
  std::ifstream in(std::string(CVEREPAIR_SOURCE_DIR) + "/tests/fixtures/extraction_cases.json");
  REQUIRE(in);
  nlohmann::json cases;
  in >> cases;
  REQUIRE(cases.size() == 40);

  int well_formed = 0, recovered = 0, none = 0;
  for (const auto& c : cases) {
    CAPTURE(c.at("id").get<std::string>());
    const CandidatePatch p = extract_patch(c.at("response").get<std::string>());
    const std::string expected_status = c.at("expected_status").get<std::string>();
    CHECK(extraction_status_name(p.status) == expected_status);
    if (c.at("expected_code").is_null()) {
      CHECK_FALSE(p.code.has_value());
    } else {
      REQUIRE(p.code.has_value());
      CHECK(*p.code == c.at("expected_code").get<std::string>());
    }
    if (expected_status == "well_formed") ++well_formed;
    if (expected_status == "recovered") ++recovered;
    if (expected_status == "none") ++none;
  }
  CHECK(well_formed == 30);
  CHECK(recovered == 7);
  CHECK(none == 3);
}

TEST_CASE("patch status none iff code absent") {
  const CandidatePatch none = extract_patch("no code here at all");
  CHECK(none.status == ExtractionStatus::None);
  CHECK_FALSE(none.code.has_value());

  const CandidatePatch some = extract_patch("```c\nint f(void){return 0;}\n```");
  CHECK(some.status == ExtractionStatus::WellFormed);
  REQUIRE(some.code.has_value());
  CHECK_FALSE(some.code->empty());
}

TEST_CASE("assess_divergence on an identical patch") {
  const RepairTask t = fixture_task();
  CandidatePatch p{t.before_code, ExtractionStatus::WellFormed};
  const DivergenceDiagnostics d = assess_divergence(t.before_code, p, 0.35);
  CHECK(d.codebleu_vs_input == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(d.parse_ok);
  CHECK_FALSE(d.any_flag());
}

TEST_CASE("unrelated patch trips the excessive_change flag") {
  // This pair scores 0.242 composite against each other (brute-force
  // oracle), safely under the 0.35 default threshold.
  const char* ring =
      "int ring_push(struct ring *r, uint8_t byte)\n{\n  size_t next = (r->head + 1) % "
      "r->capacity;\n  if (next == r->tail)\n    return -1;\n  r->data[r->head] = byte;\n "
      " r->head = next;\n  return 0;\n}\n";
  const char* hex =
      "int hex_value(int ch)\n{\n  if (ch >= '0' && ch <= '9')\n    return ch - '0';\n  if "
      "(ch >= 'a' && ch <= 'f')\n    return ch - 'a' + 10;\n  if (ch >= 'A' && ch <= "
      "'F')\n    return ch - 'A' + 10;\n  return -1;\n}\n";
  CandidatePatch p{std::string(ring), ExtractionStatus::WellFormed};
  const DivergenceDiagnostics d = assess_divergence(hex, p, 0.35);
  CHECK(d.codebleu_vs_input < 0.35);
  CHECK(d.excessive_change);
  CHECK(d.parse_ok);
}

TEST_CASE("broken patch trips parse_failed") {
  CandidatePatch p{std::string("int f() { if ("), ExtractionStatus::Recovered};
  const DivergenceDiagnostics d = assess_divergence(fixture_task().before_code, p, 0.35);
  CHECK(d.parse_failed);
  CHECK_FALSE(d.parse_ok);
}

TEST_CASE("absent patch yields empty_patch with score zero") {
  CandidatePatch p{std::nullopt, ExtractionStatus::None};
  const DivergenceDiagnostics d = assess_divergence(fixture_task().before_code, p, 0.35);
  CHECK(d.empty_patch);
  CHECK(d.codebleu_vs_input == 0.0);
}

TEST_CASE("threshold must be a proper fraction") {
  CandidatePatch p{std::string("int f(){return 0;}"), ExtractionStatus::WellFormed};
  CHECK_THROWS_AS(assess_divergence("int g(){return 1;}", p, 0.0), ConfigError);
  CHECK_THROWS_AS(assess_divergence("int g(){return 1;}", p, 1.0), ConfigError);
}

TEST_CASE("unguided run executes exactly one iteration") {
  ScriptedBackend backend({kGoodResponse});
  PipelineConfig cfg;
  cfg.label = ConfigLabel::Unguided;
  const RepairOutcome o =
      run_repair(fixture_task(), cfg, backend, profile(), prompting::PromptRenderer());
  CHECK(o.iterations.size() == 1);
  CHECK(backend.calls() == 1);
  CHECK(o.config_label == "unguided");
  CHECK(o.final_patch.status == ExtractionStatus::WellFormed);
  CHECK(o.iterations[0].prompt.user_text.find("CVE-") == std::string::npos);
}

TEST_CASE("guided run embeds context and stops after one iteration") {
  ScriptedBackend backend({kGoodResponse});
  PipelineConfig cfg;
  cfg.label = ConfigLabel::Guided;
  const RepairOutcome o =
      run_repair(fixture_task(), cfg, backend, profile(), prompting::PromptRenderer());
  CHECK(o.iterations.size() == 1);
  CHECK(o.iterations[0].prompt.user_text.find("CVE-2020-12141") != std::string::npos);
}

TEST_CASE("guided_feedback always runs the second iteration and keeps its patch") {
  // Iteration 1 returns a clean patch (no flags); iteration 2 must still
  // run and its output is final even though it differs.
  const char* second = "```c\nint second_version(void) { return 2; }\n```";
  ScriptedBackend backend({kGoodResponse, second});
  PipelineConfig cfg;
  cfg.label = ConfigLabel::GuidedFeedback;
  const RepairOutcome o =
      run_repair(fixture_task(), cfg, backend, profile(), prompting::PromptRenderer());
  REQUIRE(o.iterations.size() == 2);
  CHECK(backend.calls() == 2);
  REQUIRE(o.final_patch.code.has_value());
  CHECK(*o.final_patch.code == "int second_version(void) { return 2; }");
  CHECK(o.iterations[1].prompt.kind == prompting::PromptKind::Feedback);
  // No flags on iteration 1 -> confirmation-pass feedback text.
  CHECK(o.iterations[1].prompt.user_text.find("No issues were detected automatically") !=
        std::string::npos);
  // The whole exchange stays in one session: request 2 carries the history.
  REQUIRE(backend.requests().size() == 2);
  CHECK(backend.requests()[1].size() == 4);  // system, user, assistant, user
}

TEST_CASE("failed extraction still drives a second iteration") {
  ScriptedBackend backend({"I am sorry, I cannot help with that.", kGoodResponse});
  PipelineConfig cfg;
  cfg.label = ConfigLabel::GuidedFeedback;
  const RepairTask task = fixture_task();
  const RepairOutcome o =
      run_repair(task, cfg, backend, profile(), prompting::PromptRenderer());
  REQUIRE(o.iterations.size() == 2);
  CHECK(o.iterations[0].patch.status == ExtractionStatus::None);
  CHECK(o.iterations[0].diagnostics.empty_patch);
  CHECK(o.iterations[1].prompt.user_text.find("No code could be extracted") !=
        std::string::npos);
  // With no candidate, the feedback embeds the original vulnerable code.
  CHECK(o.iterations[1].prompt.user_text.find(task.before_code) != std::string::npos);
  CHECK(o.final_patch.status == ExtractionStatus::WellFormed);
}

TEST_CASE("iteration limit bounds the loop") {
  ScriptedBackend backend({kGoodResponse, kGoodResponse, kGoodResponse, kGoodResponse});
  PipelineConfig cfg;
  cfg.label = ConfigLabel::GuidedFeedback;
  cfg.iteration_limit = 3;
  const RepairOutcome o =
      run_repair(fixture_task(), cfg, backend, profile(), prompting::PromptRenderer());
  CHECK(o.iterations.size() == 3);
  CHECK(backend.calls() == 3);
}

TEST_CASE("backend errors propagate to the caller") {
  ScriptedBackend backend({});
  PipelineConfig cfg;
  cfg.label = ConfigLabel::Guided;
  CHECK_THROWS_AS(
      run_repair(fixture_task(), cfg, backend, profile(), prompting::PromptRenderer()),
      TransportError);
}

TEST_CASE("ground truth stays untouched during repairs") {
  corpus::VulnRecord record;
  record.cve_id = "CVE-1";
  record.cwe_id = "CWE-125";
  record.function_name = "f";
  record.before_code = "int f(void) { return 1; }";
  record.set_after_code("int f(void) { return 2; }");
  record.cve_description = "d";
  record.cwe_description = "d";

  const auto before_reads = corpus::VulnRecord::after_code_reads().load();
  ScriptedBackend backend({kGoodResponse, kGoodResponse});
  PipelineConfig cfg;
  cfg.label = ConfigLabel::GuidedFeedback;
  run_repair(RepairTask::from_record(record), cfg, backend, profile(),
             prompting::PromptRenderer());
  CHECK(corpus::VulnRecord::after_code_reads().load() == before_reads);
}

TEST_CASE("outcome json round trip") {
  ScriptedBackend backend({kGoodResponse, "prose only, nothing usable"});
  PipelineConfig cfg;
  cfg.label = ConfigLabel::GuidedFeedback;
  RepairOutcome o =
      run_repair(fixture_task(), cfg, backend, profile(), prompting::PromptRenderer());
  o.started_at = 11;
  o.finished_at = 22;

  const nlohmann::json j = outcome_to_json(o);
  const RepairOutcome back = outcome_from_json(j);
  CHECK(outcome_to_json(back) == j);
  CHECK(back.iterations.size() == o.iterations.size());
  CHECK(back.final_patch.status == o.final_patch.status);
  CHECK(back.model == "gpt-4o");
  CHECK(j.at("divergence_threshold").get<double>() == doctest::Approx(0.35));
}

TEST_CASE("config label names round trip") {
  CHECK(config_label_from_name("unguided") == ConfigLabel::Unguided);
  CHECK(config_label_from_name("guided") == ConfigLabel::Guided);
  CHECK(config_label_from_name("guided_feedback") == ConfigLabel::GuidedFeedback);
  CHECK(config_label_from_name("guided+feedback") == ConfigLabel::GuidedFeedback);
  CHECK_THROWS_AS(config_label_from_name("mystery"), ConfigError);
}
