#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace cverepair::corpus {

// One CVE-linked function pair: the vulnerable "before" snippet and the
// fixed "after" snippet, plus metadata. The fixed code is deliberately
// reachable only through after_code(), which counts reads so a pipeline
// run can prove it never looked at the ground truth.
class VulnRecord {
public:
  std::string cve_id;
  std::string cwe_id;
  std::string function_name;
  std::string file_path;
  std::string before_code;
  std::string cve_description;
  std::string cwe_description;
  std::string language = "C";

  VulnRecord() = default;
  VulnRecord(const VulnRecord& other) { *this = other; }
  VulnRecord& operator=(const VulnRecord& other) {
    if (this != &other) {
      cve_id = other.cve_id;
      cwe_id = other.cwe_id;
      function_name = other.function_name;
      file_path = other.file_path;
      before_code = other.before_code;
      cve_description = other.cve_description;
      cwe_description = other.cwe_description;
      language = other.language;
      after_code_ = other.after_code_;
    }
    return *this;
  }
  VulnRecord(VulnRecord&&) = default;
  VulnRecord& operator=(VulnRecord&&) = default;

  void set_after_code(std::string code) { after_code_ = std::move(code); }

  const std::string& after_code() const {
    after_code_reads().fetch_add(1, std::memory_order_relaxed);
    return after_code_;
  }

  bool after_code_empty() const { return after_code_.empty(); }

  // Process-wide count of after_code() reads, for the ground-truth
  // isolation audit.
  static std::atomic<std::uint64_t>& after_code_reads() {
    static std::atomic<std::uint64_t> reads{0};
    return reads;
  }

private:
  std::string after_code_;
};

nlohmann::json record_to_json(const VulnRecord& r);
VulnRecord record_from_json(const nlohmann::json& j);

// Corpus files hold one VulnRecord JSON object per line, UTF-8.
std::vector<VulnRecord> read_corpus_file(const std::string& path);
void write_corpus_file(const std::string& path, const std::vector<VulnRecord>& records);

}  // namespace cverepair::corpus
