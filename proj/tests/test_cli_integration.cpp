// End-to-end checks of the cverepair binary: each subcommand is spawned as
// a real process and judged on exit code, stdout/stderr routing, and file
// output.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <sqlite3.h>

#include "cverepair/corpus.hpp"
#include "cverepair/llm.hpp"
#include "cverepair/pipeline.hpp"

using namespace cverepair;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Sandbox {
  fs::path dir;
  Sandbox() {
    dir = fs::temp_directory_path() /
          ("cverepair_cli_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }
  std::string file(const std::string& name) const { return (dir / name).string(); }

  RunResult run(const std::string& args) const {
    const std::string out_path = file("__stdout");
    const std::string err_path = file("__stderr");
    const std::string cmd =
        std::string(CVEREPAIR_BIN) + " " + args + " > " + out_path + " 2> " + err_path;
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    return r;
  }
};

void build_fixture_db(const std::string& path) {
  sqlite3* db = nullptr;
  REQUIRE(sqlite3_open(path.c_str(), &db) == SQLITE_OK);
  auto exec = [&](const std::string& sql) {
    REQUIRE(sqlite3_exec(db, sql.c_str(), nullptr, nullptr, nullptr) == SQLITE_OK);
  };
  exec("CREATE TABLE cve (cve_id TEXT PRIMARY KEY, description TEXT)");
  exec("CREATE TABLE fixes (cve_id TEXT, hash TEXT, repo_url TEXT)");
  exec("CREATE TABLE file_change (file_change_id TEXT PRIMARY KEY, hash TEXT, filename TEXT, "
       "programming_language TEXT)");
  exec("CREATE TABLE method_change (method_change_id TEXT PRIMARY KEY, file_change_id TEXT, "
       "name TEXT, code TEXT, before_change TEXT)");
  exec("CREATE TABLE cwe (cwe_id TEXT PRIMARY KEY, cwe_name TEXT, description TEXT)");
  exec("CREATE TABLE cwe_classification (cve_id TEXT, cwe_id TEXT)");
  int mc = 0;
  auto pair = [&](const std::string& cve, const std::string& cwe, const std::string& fn) {
    exec("INSERT INTO cve VALUES ('" + cve + "', 'a crafted input crashes " + fn + "')");
    exec("INSERT OR IGNORE INTO cwe VALUES ('" + cwe + "', 'n', 'd')");
    exec("INSERT INTO cwe_classification VALUES ('" + cve + "', '" + cwe + "')");
    exec("INSERT INTO fixes VALUES ('" + cve + "', 'h" + cve + "', 'r')");
    exec("INSERT INTO file_change VALUES ('fc" + cve + "', 'h" + cve + "', 'src/x.c', 'C')");
    exec("INSERT INTO method_change VALUES ('m" + std::to_string(mc++) + "', 'fc" + cve +
         "', '" + fn + "', 'int " + fn + "(int a) { return 10 / a; }', 'True')");
    exec("INSERT INTO method_change VALUES ('m" + std::to_string(mc++) + "', 'fc" + cve +
         "', '" + fn + "', 'int " + fn + "(int a) { return a ? 10 / a : 0; }', 'False')");
  };
  pair("CVE-2023-0001", "CWE-369", "div_a");
  pair("CVE-2023-0002", "CWE-369", "div_b");
  pair("CVE-2023-0003", "CWE-125", "read_c");
  sqlite3_close(db);
}

class CliStub {
public:
  CliStub() {
    server_.Post("/v1/chat/completions",
                 [](const httplib::Request& req, httplib::Response& res) {
                   const auto body = nlohmann::json::parse(req.body);
                   const std::size_t turn = body.at("messages").size();
                   nlohmann::json out;
                   out["choices"] = {
                       {{"message",
                         {{"role", "assistant"},
                          {"content", "```c\nint repaired(int a) { return a ? 10 / a : " +
                                          std::to_string(turn) + "; }\n```"}}}}};
                   res.set_content(out.dump(), "application/json");
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~CliStub() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }

private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

std::string write_run_config(const Sandbox& box, const std::string& corpus,
                             const std::string& endpoint) {
  nlohmann::json j;
  j["corpus"] = corpus;
  j["output_dir"] = box.file("out");
  j["model"] = {{"builtin", "llama-3-70b"}, {"endpoint", endpoint}};
  j["config_label"] = "guided_feedback";
  const std::string path = box.file("run.json");
  std::ofstream(path) << j.dump(2);
  return path;
}

}  // namespace

TEST_CASE("missing database path exits nonzero and names the path") {
  Sandbox box;
  const RunResult r = box.run("ingest /no/such/place.db -o " + box.file("c.jsonl"));
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("/no/such/place.db") != std::string::npos);
}

TEST_CASE("ingest writes the corpus, metadata, and a frequency table") {
  Sandbox box;
  build_fixture_db(box.file("fixture.db"));
  const RunResult r =
      box.run("ingest " + box.file("fixture.db") + " -o " + box.file("corpus.jsonl"));
  REQUIRE(r.exit_code == 0);

  // frequency table on stdout, CWE-369 first with 2 pairs
  CHECK(r.out.find("cwe_id,count") != std::string::npos);
  CHECK(r.out.find("CWE-369,2") != std::string::npos);
  CHECK(r.out.find("CWE-125,1") != std::string::npos);

  const auto records = corpus::read_corpus_file(box.file("corpus.jsonl"));
  CHECK(records.size() == 3);

  // run metadata echoes the default token limit
  const auto meta = nlohmann::json::parse(slurp(box.file("corpus.jsonl") + ".meta.json"));
  CHECK(meta.at("token_limit") == 500);
  CHECK(meta.at("tokenizer") == "builtin");
}

TEST_CASE("full record, replay, resume, score, report flow") {
  Sandbox box;
  build_fixture_db(box.file("fixture.db"));
  REQUIRE(box.run("ingest " + box.file("fixture.db") + " -o " + box.file("corpus.jsonl"))
              .exit_code == 0);

  std::string config_path;
  {
    CliStub stub;
    config_path = write_run_config(box, box.file("corpus.jsonl"), stub.endpoint());
    const RunResult rec = box.run("run -c " + config_path + " --record " +
                                  box.file("cassette.jsonl") + " -o " + box.file("rec.jsonl"));
    REQUIRE(rec.exit_code == 0);
  }

  // replay is deterministic
  const RunResult rep1 = box.run("run -c " + config_path + " --replay " +
                                 box.file("cassette.jsonl") + " -o " + box.file("rep1.jsonl"));
  REQUIRE(rep1.exit_code == 0);
  const RunResult rep2 = box.run("run -c " + config_path + " --replay " +
                                 box.file("cassette.jsonl") + " -o " + box.file("rep2.jsonl"));
  REQUIRE(rep2.exit_code == 0);
  CHECK(slurp(box.file("rep1.jsonl")) == slurp(box.file("rep2.jsonl")));

  // the resolved config snapshot lands in the output dir
  CHECK(fs::exists(box.file("out") + "/run_config.json"));

  SUBCASE("interrupted run resumes without duplicates") {
    // keep only the first outcome line, as if the process had been killed
    const std::string full = slurp(box.file("rep1.jsonl"));
    const std::size_t first_nl = full.find('\n');
    std::ofstream(box.file("partial.jsonl")) << full.substr(0, first_nl + 1);

    const RunResult resumed =
        box.run("run -c " + config_path + " --replay " + box.file("cassette.jsonl") + " -o " +
                box.file("partial.jsonl"));
    REQUIRE(resumed.exit_code == 0);
    const auto outcomes = pipeline::read_outcome_file(box.file("partial.jsonl"));
    REQUIRE(outcomes.size() == 3);
    std::set<std::string> keys;
    for (const auto& o : outcomes) {
      keys.insert(o.cve_id + "/" + o.function_name);
      CHECK(o.error.empty());
    }
    CHECK(keys.size() == 3);
    CHECK(resumed.err.find("resumed past 1") != std::string::npos);
    // the resumed file converges on the uninterrupted replay byte for byte
    CHECK(slurp(box.file("partial.jsonl")) == slurp(box.file("rep1.jsonl")));
  }

  SUBCASE("score then report") {
    const RunResult sc = box.run("score --outcomes " + box.file("rep1.jsonl") + " --corpus " +
                                 box.file("corpus.jsonl") + " -o " + box.file("rows.jsonl"));
    REQUIRE(sc.exit_code == 0);

    const RunResult rp =
        box.run("report --rows " + box.file("rows.jsonl") + " --format markdown");
    REQUIRE(rp.exit_code == 0);
    CHECK(rp.out.find("| model | config |") != std::string::npos);
    CHECK(rp.out.find("llama-3-70b") != std::string::npos);

    const RunResult rcsv = box.run("report --rows " + box.file("rows.jsonl") +
                                   " --format csv --group-by cwe -o " + box.file("rep.csv"));
    REQUIRE(rcsv.exit_code == 0);
    CHECK(slurp(box.file("rep.csv")).find("cwe_config,CWE-") != std::string::npos);
  }

  SUBCASE("score with a mismatched corpus names the missing record") {
    std::vector<corpus::VulnRecord> other;
    corpus::VulnRecord r;
    r.cve_id = "CVE-1999-9999";
    r.cwe_id = "CWE-1";
    r.function_name = "unrelated";
    r.file_path = "f.c";
    r.before_code = "int unrelated(void){return 1;}";
    r.set_after_code("int unrelated(void){return 2;}");
    r.cve_description = "d";
    r.cwe_description = "d";
    other.push_back(std::move(r));
    corpus::write_corpus_file(box.file("other.jsonl"), other);

    const RunResult sc = box.run("score --outcomes " + box.file("rep1.jsonl") + " --corpus " +
                                 box.file("other.jsonl") + " -o " + box.file("rows2.jsonl"));
    CHECK(sc.exit_code != 0);
    CHECK(sc.err.find("CVE-2023-0001") != std::string::npos);
  }
}

TEST_CASE("empty outcome file scores to empty rows with zero exit") {
  Sandbox box;
  build_fixture_db(box.file("fixture.db"));
  REQUIRE(box.run("ingest " + box.file("fixture.db") + " -o " + box.file("corpus.jsonl"))
              .exit_code == 0);
  std::ofstream(box.file("empty.jsonl")).close();

  const RunResult sc = box.run("score --outcomes " + box.file("empty.jsonl") + " --corpus " +
                               box.file("corpus.jsonl") + " -o " + box.file("rows.jsonl"));
  CHECK(sc.exit_code == 0);
  CHECK(slurp(box.file("rows.jsonl")).empty());

  const RunResult rp = box.run("report --rows " + box.file("rows.jsonl") + " --format csv");
  CHECK(rp.exit_code == 0);
  CHECK(rp.out ==
        "grouping,key,config_label,count,mean_similarity,mean_baseline,improvement\n");
}

TEST_CASE("score-pair prints one JSON breakdown to stdout") {
  Sandbox box;
  std::ofstream(box.file("cand.c")) << "int f(int a) { if (a < 0) return 0; return a; }\n";
  std::ofstream(box.file("ref.c")) << "int f(int a) { return a; }\n";

  const RunResult r = box.run("score-pair " + box.file("cand.c") + " " + box.file("ref.c"));
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.contains("ngram"));
  CHECK(j.contains("weighted_ngram"));
  CHECK(j.contains("ast"));
  CHECK(j.contains("dataflow"));
  CHECK(j.at("composite").get<double>() > 0.0);
  CHECK(j.at("composite").get<double>() <= 1.0);

  SUBCASE("identical files score composite 1") {
    const RunResult same =
        box.run("score-pair " + box.file("ref.c") + " " + box.file("ref.c"));
    REQUIRE(same.exit_code == 0);
    CHECK(nlohmann::json::parse(same.out).at("composite").get<double>() ==
          doctest::Approx(1.0));
  }

  SUBCASE("custom weights") {
    const RunResult w = box.run("score-pair " + box.file("cand.c") + " " + box.file("ref.c") +
                                " --weights 1 0 0 0");
    REQUIRE(w.exit_code == 0);
    const auto jw = nlohmann::json::parse(w.out);
    CHECK(jw.at("composite").get<double>() ==
          doctest::Approx(jw.at("ngram").get<double>()));
  }
}

TEST_CASE("apply subcommand patches a file on disk") {
  Sandbox box;
  const std::string src = box.file("lib.c");
  std::ofstream(src) << "static int helper(void) { return 1; }\n\n"
                        "int broken(int a)\n{\n  return 10 / a;\n}\n";
  std::ofstream(box.file("patch.c"))
      << "int broken(int a)\n{\n  return a ? 10 / a : 0;\n}";

  const RunResult r =
      box.run("apply " + src + " broken --patch-file " + box.file("patch.c"));
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(src + ".patched"));
  CHECK(slurp(src + ".patched").find("a ? 10 / a : 0") != std::string::npos);
  CHECK(slurp(src).find("return 10 / a;") != std::string::npos);

  SUBCASE("build command status is surfaced") {
    const RunResult ok = box.run("apply " + src + " broken --patch-file " +
                                 box.file("patch.c") + " --build-cmd true");
    CHECK(ok.exit_code == 0);
    const RunResult bad = box.run("apply " + src + " broken --patch-file " +
                                  box.file("patch.c") + " --build-cmd false");
    CHECK(bad.exit_code != 0);
  }

  SUBCASE("missing function is a clean failure") {
    const RunResult miss =
        box.run("apply " + src + " nonexistent --patch-file " + box.file("patch.c"));
    CHECK(miss.exit_code != 0);
    CHECK(miss.err.find("nonexistent") != std::string::npos);
  }
}

TEST_CASE("run flag overrides beat the config file") {
  Sandbox box;
  build_fixture_db(box.file("fixture.db"));
  REQUIRE(box.run("ingest " + box.file("fixture.db") + " -o " + box.file("corpus.jsonl"))
              .exit_code == 0);
  CliStub stub;
  const std::string config_path =
      write_run_config(box, box.file("corpus.jsonl"), stub.endpoint());

  const RunResult r = box.run("run -c " + config_path +
                              " --config-label unguided --sample-fraction 0.34 -o " +
                              box.file("sampled.jsonl"));
  REQUIRE(r.exit_code == 0);
  const auto outcomes = pipeline::read_outcome_file(box.file("sampled.jsonl"));
  REQUIRE(outcomes.size() == 1);  // round(0.34 * 3)
  CHECK(outcomes[0].config_label == "unguided");
  CHECK(outcomes[0].iterations.size() == 1);
}

TEST_CASE("invalid config file is a clean error") {
  Sandbox box;
  std::ofstream(box.file("bad.json")) << "{ not json";
  const RunResult r = box.run("run -c " + box.file("bad.json"));
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("error:") != std::string::npos);
}
