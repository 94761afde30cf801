#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "cverepair/llm.hpp"
#include "cverepair/pipeline.hpp"

namespace cverepair::cli {

// Declarative description of one batch run, loaded from a JSON config
// file. Referenced paths must exist at load time.
struct RunConfig {
  std::string corpus_path;
  std::string output_dir;
  llm::ModelProfile model;
  pipeline::PipelineConfig pipeline;
  double sample_fraction = 1.0;
  std::uint64_t sample_seed = 13;
  int parallelism = 1;
  std::string template_dir;  // empty: builtin templates

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // Parses, range-checks, and verifies referenced paths exist.
  static RunConfig load(const std::string& path);
};

struct RunStats {
  std::size_t attempted = 0;
  std::size_t skipped_resume = 0;
  std::size_t failed = 0;
};

// Executes the configured batch: samples the corpus, skips records already
// present in the outcome file (resume), runs repairs with the configured
// parallelism, and appends one outcome JSON line per record in corpus
// order. Replay mode zeroes timestamps so reruns are byte-identical, and
// cassette-backed runs are forced to parallelism 1 to preserve cassette
// ordering. A backend error fails that record only.
RunStats run_batch(const RunConfig& config, const std::string& outcome_path,
                   const std::optional<std::string>& replay_cassette,
                   const std::optional<std::string>& record_cassette,
                   std::function<void(const std::string&)> warn = {});

}  // namespace cverepair::cli
