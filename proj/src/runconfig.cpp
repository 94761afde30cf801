#include "cverepair/runconfig.hpp"

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "cverepair/corpus.hpp"
#include "cverepair/errors.hpp"

namespace cverepair::cli {
namespace fs = std::filesystem;

namespace {

llm::ModelProfile profile_from_json(const nlohmann::json& j) {
  if (j.is_string()) return llm::ModelProfile::builtin(j.get<std::string>());
  llm::ModelProfile p;
  if (j.contains("builtin")) p = llm::ModelProfile::builtin(j["builtin"].get<std::string>());
  if (j.contains("name")) p.name = j["name"].get<std::string>();
  if (j.contains("context_length")) p.context_length = j["context_length"].get<std::size_t>();
  if (j.contains("endpoint")) p.endpoint = j["endpoint"].get<std::string>();
  if (j.contains("api_key_env")) p.api_key_env = j["api_key_env"].get<std::string>();
  if (j.contains("temperature")) p.temperature = j["temperature"].get<double>();
  if (j.contains("max_output_tokens")) {
    p.max_output_tokens = j["max_output_tokens"].get<std::size_t>();
  }
  if (j.contains("parameter_count")) p.parameter_count = j["parameter_count"].get<std::string>();
  return p;
}

nlohmann::json profile_to_json(const llm::ModelProfile& p) {
  nlohmann::json j;
  j["name"] = p.name;
  j["context_length"] = p.context_length;
  j["endpoint"] = p.endpoint;
  j["api_key_env"] = p.api_key_env;
  j["temperature"] = p.temperature;
  j["max_output_tokens"] = p.max_output_tokens;
  j["parameter_count"] = p.parameter_count;
  return j;
}

std::int64_t now_unix() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.corpus_path = j.at("corpus").get<std::string>();
  c.output_dir = j.at("output_dir").get<std::string>();
  c.model = profile_from_json(j.at("model"));
  c.pipeline.label =
      pipeline::config_label_from_name(j.at("config_label").get<std::string>());
  if (j.contains("iteration_limit")) {
    c.pipeline.iteration_limit = j["iteration_limit"].get<int>();
  }
  if (j.contains("divergence_threshold")) {
    c.pipeline.divergence_threshold = j["divergence_threshold"].get<double>();
  }
  if (j.contains("metric_weights")) {
    auto w = j["metric_weights"].get<std::vector<double>>();
    if (w.size() != 4) throw ConfigError("metric_weights must have 4 entries");
    for (std::size_t i = 0; i < 4; ++i) c.pipeline.metric.weights[i] = w[i];
  }
  if (j.contains("tokenizer")) c.pipeline.tokenizer_id = j["tokenizer"].get<std::string>();
  if (j.contains("token_budget")) c.pipeline.token_budget = j["token_budget"].get<std::size_t>();
  if (j.contains("strict_budget")) c.pipeline.strict_budget = j["strict_budget"].get<bool>();
  if (j.contains("sample_fraction")) c.sample_fraction = j["sample_fraction"].get<double>();
  if (j.contains("sample_seed")) c.sample_seed = j["sample_seed"].get<std::uint64_t>();
  if (j.contains("parallelism")) c.parallelism = j["parallelism"].get<int>();
  if (j.contains("template_dir")) c.template_dir = j["template_dir"].get<std::string>();
  return c;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["corpus"] = corpus_path;
  j["output_dir"] = output_dir;
  j["model"] = profile_to_json(model);
  j["config_label"] = pipeline::config_label_name(pipeline.label);
  j["iteration_limit"] = pipeline.iteration_limit;
  j["divergence_threshold"] = pipeline.divergence_threshold;
  j["metric_weights"] = pipeline.metric.weights;
  j["tokenizer"] = pipeline.tokenizer_id;
  j["token_budget"] = pipeline.token_budget;
  j["strict_budget"] = pipeline.strict_budget;
  j["sample_fraction"] = sample_fraction;
  j["sample_seed"] = sample_seed;
  j["parallelism"] = parallelism;
  j["template_dir"] = template_dir;
  return j;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  RunConfig c = from_json(j);

  if (!fs::exists(c.corpus_path)) {
    throw ConfigError("corpus path does not exist: " + c.corpus_path);
  }
  if (!c.template_dir.empty() && !fs::is_directory(c.template_dir)) {
    throw ConfigError("template directory does not exist: " + c.template_dir);
  }
  if (c.pipeline.iteration_limit < 1) throw ConfigError("iteration_limit must be >= 1");
  if (!(c.pipeline.divergence_threshold > 0.0 && c.pipeline.divergence_threshold < 1.0)) {
    throw ConfigError("divergence_threshold must be in (0,1)");
  }
  if (!(c.sample_fraction > 0.0 && c.sample_fraction <= 1.0)) {
    throw ConfigError("sample_fraction must be in (0,1]");
  }
  if (c.parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (c.pipeline.token_budget == 0) throw ConfigError("token_budget must be > 0");
  if (!TokenCounter::is_known_scheme(c.pipeline.tokenizer_id)) {
    throw ConfigError("unknown tokenizer: " + c.pipeline.tokenizer_id);
  }
  return c;
}

RunStats run_batch(const RunConfig& config, const std::string& outcome_path,
                   const std::optional<std::string>& replay_cassette,
                   const std::optional<std::string>& record_cassette,
                   std::function<void(const std::string&)> warn) {
  auto emit_warning = [&](const std::string& msg) {
    if (warn) warn(msg);
  };

  const bool deterministic = replay_cassette.has_value();
  if (replay_cassette && record_cassette) {
    throw ConfigError("cannot replay and record at the same time");
  }

  std::vector<corpus::VulnRecord> records = corpus::read_corpus_file(config.corpus_path);
  records = corpus::sample_fraction(records, config.sample_fraction, config.sample_seed);

  // Resume: skip records that already have an outcome line for this
  // model/config combination.
  std::set<std::string> done;
  if (fs::exists(outcome_path)) {
    for (const auto& o : pipeline::read_outcome_file(outcome_path)) {
      done.insert(o.cve_id + "\x1f" + o.function_name + "\x1f" + o.model + "\x1f" +
                  o.config_label);
    }
  }

  std::unique_ptr<llm::Backend> backend;
  llm::RecordingBackend* recorder = nullptr;
  if (replay_cassette) {
    backend = std::make_unique<llm::ReplayBackend>(llm::Cassette::load(*replay_cassette));
  } else {
    auto http = std::make_unique<llm::HttpBackend>();
    if (record_cassette) {
      auto rec = std::make_unique<llm::RecordingBackend>(std::move(http));
      recorder = rec.get();
      backend = std::move(rec);
    } else {
      backend = std::move(http);
    }
  }

  // Cassettes are strictly ordered, so cassette-backed runs serialize.
  int parallelism = config.parallelism;
  if ((replay_cassette || record_cassette) && parallelism != 1) {
    emit_warning("cassette in use; forcing parallelism 1");
    parallelism = 1;
  }

  const prompting::PromptRenderer renderer(
      config.template_dir.empty() ? prompting::PromptTemplates::builtin()
                                  : prompting::PromptTemplates::load(config.template_dir),
      TokenCounter(config.pipeline.tokenizer_id));

  struct Job {
    std::size_t order;
    const corpus::VulnRecord* record;
    bool write;  // resumed records under replay still consume the cassette
  };
  std::vector<Job> jobs;
  RunStats stats;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string key = r.cve_id + "\x1f" + r.function_name + "\x1f" + config.model.name +
                            "\x1f" + pipeline::config_label_name(config.pipeline.label);
    if (done.count(key)) {
      ++stats.skipped_resume;
      // A strictly ordered cassette only lines up when the completed
      // records are replayed through it as well; their outcomes are
      // simply not re-written.
      if (deterministic) jobs.push_back({jobs.size(), &records[i], false});
      continue;
    }
    jobs.push_back({jobs.size(), &records[i], true});
  }

  std::ofstream out(outcome_path, std::ios::app);
  if (!out) throw Error("cannot open outcome file for append: " + outcome_path);

  // Outcomes are written in job order regardless of completion order, so
  // a finished file is deterministic for a fixed corpus and cassette.
  std::mutex mu;
  std::condition_variable cv;
  std::size_t next_to_write = 0;
  std::size_t next_job = 0;
  std::vector<std::thread> workers;

  auto run_one = [&](const Job& job) {
    pipeline::RepairOutcome outcome;
    const std::int64_t t0 = deterministic ? 0 : now_unix();
    try {
      outcome = pipeline::run_repair(pipeline::RepairTask::from_record(*job.record),
                                     config.pipeline, *backend, config.model, renderer);
    } catch (const std::exception& e) {
      outcome = pipeline::RepairOutcome{};
      outcome.cve_id = job.record->cve_id;
      outcome.cwe_id = job.record->cwe_id;
      outcome.function_name = job.record->function_name;
      outcome.config_label = pipeline::config_label_name(config.pipeline.label);
      outcome.model = config.model.name;
      outcome.divergence_threshold = config.pipeline.divergence_threshold;
      outcome.error = e.what();
    }
    outcome.started_at = t0;
    outcome.finished_at = deterministic ? 0 : now_unix();
    return outcome;
  };

  auto worker = [&] {
    while (true) {
      std::size_t idx;
      {
        std::lock_guard<std::mutex> lk(mu);
        if (next_job >= jobs.size()) return;
        idx = next_job++;
      }
      pipeline::RepairOutcome outcome = run_one(jobs[idx]);
      {
        std::unique_lock<std::mutex> lk(mu);
        cv.wait(lk, [&] { return next_to_write == jobs[idx].order; });
        if (jobs[idx].write) {
          out << pipeline::outcome_to_json(outcome).dump() << '\n';
          out.flush();
          ++stats.attempted;
          if (!outcome.error.empty()) ++stats.failed;
        }
        ++next_to_write;
      }
      cv.notify_all();
    }
  };

  if (parallelism == 1) {
    worker();
  } else {
    for (int i = 0; i < parallelism; ++i) workers.emplace_back(worker);
    for (auto& t : workers) t.join();
  }

  if (recorder && record_cassette) recorder->cassette().save(*record_cassette);
  return stats;
}

}  // namespace cverepair::cli
