#include "cverepair/record.hpp"

#include <fstream>

#include "cverepair/errors.hpp"

namespace cverepair::corpus {

nlohmann::json record_to_json(const VulnRecord& r) {
  nlohmann::json j;
  j["cve_id"] = r.cve_id;
  j["cwe_id"] = r.cwe_id;
  j["function_name"] = r.function_name;
  j["file_path"] = r.file_path;
  j["before_code"] = r.before_code;
  j["after_code"] = r.after_code();
  j["cve_description"] = r.cve_description;
  j["cwe_description"] = r.cwe_description;
  j["language"] = r.language;
  return j;
}

VulnRecord record_from_json(const nlohmann::json& j) {
  VulnRecord r;
  r.cve_id = j.at("cve_id").get<std::string>();
  r.cwe_id = j.at("cwe_id").get<std::string>();
  r.function_name = j.at("function_name").get<std::string>();
  r.file_path = j.at("file_path").get<std::string>();
  r.before_code = j.at("before_code").get<std::string>();
  r.set_after_code(j.at("after_code").get<std::string>());
  r.cve_description = j.at("cve_description").get<std::string>();
  r.cwe_description = j.at("cwe_description").get<std::string>();
  r.language = j.at("language").get<std::string>();
  return r;
}

std::vector<VulnRecord> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file: " + path);
  std::vector<VulnRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error("corpus file " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void write_corpus_file(const std::string& path, const std::vector<VulnRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write corpus file: " + path);
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

}  // namespace cverepair::corpus
