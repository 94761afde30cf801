#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cverepair/record.hpp"
#include "cverepair/tokenizer.hpp"

namespace cverepair::corpus {

// Filtering policy applied during ingestion.
struct CorpusFilter {
  std::string target_language = "C";
  std::size_t token_limit = 500;
  std::set<std::string> excluded_cwes = {"NVD-CWE-noinfo", "NVD-CWE-Other"};
  std::size_t min_pairs_per_cwe = 0;
  std::string tokenizer_id = "builtin";

  // Case-insensitive membership test for excluded CWE labels.
  bool cwe_excluded(const std::string& cwe_id) const;
};

struct CorpusSplit {
  std::vector<VulnRecord> train;
  std::vector<VulnRecord> test;
  std::uint64_t seed = 0;
  double ratio = 0.9;
};

// One raw per-function change row as it comes out of the database join:
// a (cve, function) group member flagged as the before or after variant.
struct RawChangeRow {
  std::string cve_id;
  std::string cwe_id;
  std::string function_name;
  std::string file_path;
  std::string code;
  bool is_before = false;
  std::string cve_description;
  std::string cwe_description;
  std::string language;
};

// Keeps exactly the (cve_id, function_name) groups with precisely one
// before and one after snippet; every other group is dropped. Pure
// filtering; never fails.
std::vector<VulnRecord> pair_candidates(const std::vector<RawChangeRow>& rows);

// Applies the record-level filter predicates (excluded CWE, token limit,
// identical before/after, per-CWE minimum) to already-paired records.
std::vector<VulnRecord> apply_filter(std::vector<VulnRecord> records, const CorpusFilter& filter);

// Reads a CVEFixes-style SQL database and returns the filtered, paired
// record set ordered by (cve_id, function_name). Throws Error for an
// unreadable file and SchemaError (naming the table) on schema mismatch.
std::vector<VulnRecord> ingest_database(const std::string& db_path, const CorpusFilter& filter);

// Deterministic shuffle split: |train| = round(ratio * N).
CorpusSplit split_train_test(const std::vector<VulnRecord>& records, double ratio,
                             std::uint64_t seed);

// Deterministic sample of round(fraction * N) records, preserving corpus
// order in the output.
std::vector<VulnRecord> sample_fraction(const std::vector<VulnRecord>& records, double fraction,
                                        std::uint64_t seed);

// Per-CWE counts sorted by count descending, then cwe_id ascending.
std::vector<std::pair<std::string, std::size_t>> cwe_frequency(
    const std::vector<VulnRecord>& records);

}  // namespace cverepair::corpus
