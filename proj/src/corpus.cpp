#include "cverepair/corpus.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <memory>
#include <random>

#include "cverepair/errors.hpp"

namespace cverepair::corpus {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// ---- minimal sqlite RAII ---------------------------------------------

struct DbCloser {
  void operator()(sqlite3* db) const { sqlite3_close(db); }
};
using DbHandle = std::unique_ptr<sqlite3, DbCloser>;

struct StmtFinalizer {
  void operator()(sqlite3_stmt* s) const { sqlite3_finalize(s); }
};
using Stmt = std::unique_ptr<sqlite3_stmt, StmtFinalizer>;

DbHandle open_db(const std::string& path) {
  sqlite3* raw = nullptr;
  const int rc = sqlite3_open_v2(path.c_str(), &raw, SQLITE_OPEN_READONLY, nullptr);
  DbHandle db(raw);
  if (rc != SQLITE_OK) {
    throw Error("cannot open database " + path + ": " +
                (raw ? sqlite3_errmsg(raw) : "out of memory"));
  }
  return db;
}

Stmt prepare(sqlite3* db, const std::string& sql) {
  sqlite3_stmt* raw = nullptr;
  if (sqlite3_prepare_v2(db, sql.c_str(), -1, &raw, nullptr) != SQLITE_OK) {
    throw Error(std::string("query failed: ") + sqlite3_errmsg(db));
  }
  return Stmt(raw);
}

std::string column_text(sqlite3_stmt* s, int col) {
  const unsigned char* t = sqlite3_column_text(s, col);
  return t ? reinterpret_cast<const char*>(t) : "";
}

bool table_exists(sqlite3* db, const std::string& name) {
  Stmt s = prepare(db, "SELECT 1 FROM sqlite_master WHERE type='table' AND name=?1");
  sqlite3_bind_text(s.get(), 1, name.c_str(), -1, SQLITE_TRANSIENT);
  return sqlite3_step(s.get()) == SQLITE_ROW;
}

bool column_exists(sqlite3* db, const std::string& table, const std::string& column) {
  Stmt s = prepare(db, "PRAGMA table_info(" + table + ")");
  while (sqlite3_step(s.get()) == SQLITE_ROW) {
    if (lower(column_text(s.get(), 1)) == lower(column)) return true;
  }
  return false;
}

void check_schema(sqlite3* db) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> expected = {
      {"cve", {"cve_id", "description"}},
      {"fixes", {"cve_id", "hash"}},
      {"file_change", {"file_change_id", "hash", "filename", "programming_language"}},
      {"method_change", {"method_change_id", "file_change_id", "name", "code", "before_change"}},
      {"cwe", {"cwe_id", "description"}},
      {"cwe_classification", {"cve_id", "cwe_id"}},
  };
  for (const auto& [table, columns] : expected) {
    if (!table_exists(db, table)) {
      throw SchemaError("schema mismatch: missing table '" + table + "'");
    }
    for (const auto& col : columns) {
      if (!column_exists(db, table, col)) {
        throw SchemaError("schema mismatch: table '" + table + "' lacks column '" + col + "'");
      }
    }
  }
}

bool parse_before_flag(const std::string& v) {
  const std::string s = lower(v);
  return s == "true" || s == "1" || s == "t" || s == "yes";
}

struct GroupKey {
  std::string cve_id;
  std::string function_name;
  bool operator<(const GroupKey& o) const {
    return std::tie(cve_id, function_name) < std::tie(o.cve_id, o.function_name);
  }
};

}  // namespace

bool CorpusFilter::cwe_excluded(const std::string& cwe_id) const {
  const std::string needle = lower(cwe_id);
  for (const auto& e : excluded_cwes) {
    if (lower(e) == needle) return true;
  }
  return false;
}

std::vector<VulnRecord> pair_candidates(const std::vector<RawChangeRow>& rows) {
  std::map<GroupKey, std::pair<std::vector<const RawChangeRow*>, std::vector<const RawChangeRow*>>>
      groups;
  for (const auto& row : rows) {
    auto& g = groups[{row.cve_id, row.function_name}];
    (row.is_before ? g.first : g.second).push_back(&row);
  }

  std::vector<VulnRecord> out;
  for (const auto& [key, g] : groups) {
    if (g.first.size() != 1 || g.second.size() != 1) continue;
    const RawChangeRow& before = *g.first.front();
    const RawChangeRow& after = *g.second.front();
    VulnRecord r;
    r.cve_id = key.cve_id;
    r.function_name = key.function_name;
    r.cwe_id = before.cwe_id;
    r.file_path = before.file_path;
    r.before_code = before.code;
    r.set_after_code(after.code);
    r.cve_description = before.cve_description;
    r.cwe_description = before.cwe_description;
    r.language = before.language;
    out.push_back(std::move(r));
  }
  return out;  // map iteration is already (cve_id, function_name) ordered
}

std::vector<VulnRecord> apply_filter(std::vector<VulnRecord> records, const CorpusFilter& filter) {
  if (filter.token_limit == 0) throw ConfigError("token_limit must be > 0");
  const TokenCounter counter(filter.tokenizer_id);

  std::vector<VulnRecord> kept;
  for (auto& r : records) {
    if (r.before_code.empty() || r.after_code_empty()) continue;
    if (filter.cwe_excluded(r.cwe_id)) continue;
    if (!filter.target_language.empty() && lower(r.language) != lower(filter.target_language)) {
      continue;
    }
    if (counter.count(r.before_code) > filter.token_limit) continue;
    if (counter.count(r.after_code()) > filter.token_limit) continue;
    if (r.before_code == r.after_code()) continue;  // nothing to learn or patch
    kept.push_back(std::move(r));
  }

  if (filter.min_pairs_per_cwe > 0) {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : kept) ++counts[r.cwe_id];
    std::vector<VulnRecord> thinned;
    for (auto& r : kept) {
      if (counts[r.cwe_id] >= filter.min_pairs_per_cwe) thinned.push_back(std::move(r));
    }
    kept = std::move(thinned);
  }
  return kept;
}

std::vector<VulnRecord> ingest_database(const std::string& db_path, const CorpusFilter& filter) {
  DbHandle db = open_db(db_path);
  check_schema(db.get());

  // One row per method change and associated CWE label; the first
  // non-excluded label (ascending) becomes the record's CWE.
  const std::string sql =
      "SELECT cve.cve_id, mc.name, mc.code, mc.before_change, fc.filename, "
      "       fc.programming_language, cve.description, w.cwe_id, cwe.description, "
      "       mc.method_change_id "
      "FROM method_change mc "
      "JOIN file_change fc ON fc.file_change_id = mc.file_change_id "
      "JOIN fixes fx ON fx.hash = fc.hash "
      "JOIN cve ON cve.cve_id = fx.cve_id "
      "JOIN cwe_classification w ON w.cve_id = cve.cve_id "
      "JOIN cwe ON cwe.cwe_id = w.cwe_id "
      "WHERE lower(fc.programming_language) = lower(?1) "
      "ORDER BY cve.cve_id, mc.name, mc.method_change_id, w.cwe_id";

  Stmt stmt = prepare(db.get(), sql);
  sqlite3_bind_text(stmt.get(), 1, filter.target_language.c_str(), -1, SQLITE_TRANSIENT);

  // Fold the CWE multiplicity away: per method_change_id keep the first
  // non-excluded CWE (query order makes that the ascending-lowest).
  std::vector<RawChangeRow> rows;
  std::string last_mcid;
  bool row_open = false;
  auto row_excluded = [&](const RawChangeRow& r) { return filter.cwe_excluded(r.cwe_id); };

  while (true) {
    const int rc = sqlite3_step(stmt.get());
    if (rc == SQLITE_DONE) break;
    if (rc != SQLITE_ROW) throw Error(std::string("query failed: ") + sqlite3_errmsg(db.get()));

    const std::string mcid = column_text(stmt.get(), 9);
    RawChangeRow row;
    row.cve_id = column_text(stmt.get(), 0);
    row.function_name = column_text(stmt.get(), 1);
    row.code = column_text(stmt.get(), 2);
    row.is_before = parse_before_flag(column_text(stmt.get(), 3));
    row.file_path = column_text(stmt.get(), 4);
    row.language = column_text(stmt.get(), 5);
    row.cve_description = column_text(stmt.get(), 6);
    row.cwe_id = column_text(stmt.get(), 7);
    row.cwe_description = column_text(stmt.get(), 8);

    if (row_open && mcid == last_mcid) {
      // Additional CWE label for the same method change: upgrade an
      // excluded label to an informative one.
      if (row_excluded(rows.back()) && !row_excluded(row)) rows.back() = std::move(row);
      continue;
    }
    rows.push_back(std::move(row));
    last_mcid = mcid;
    row_open = true;
  }

  std::vector<VulnRecord> paired = pair_candidates(rows);
  for (auto& r : paired) r.language = filter.target_language;
  return apply_filter(std::move(paired), filter);
}

CorpusSplit split_train_test(const std::vector<VulnRecord>& records, double ratio,
                             std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must be in (0,1)");

  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  // Hand-rolled Fisher-Yates: std::shuffle is not reproducible across
  // standard library implementations.
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }

  const auto train_n =
      static_cast<std::size_t>(std::llround(ratio * static_cast<double>(records.size())));

  CorpusSplit split;
  split.ratio = ratio;
  split.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < train_n ? split.train : split.test).push_back(records[order[i]]);
  }
  return split;
}

std::vector<VulnRecord> sample_fraction(const std::vector<VulnRecord>& records, double fraction,
                                        std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("sample fraction must be in (0,1]");
  if (fraction == 1.0) return records;

  const auto want =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(records.size())));

  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }

  std::vector<std::size_t> chosen(order.begin(),
                                  order.begin() + static_cast<std::ptrdiff_t>(
                                                      std::min(want, order.size())));
  std::sort(chosen.begin(), chosen.end());  // keep corpus ordering

  std::vector<VulnRecord> out;
  out.reserve(chosen.size());
  for (std::size_t idx : chosen) out.push_back(records[idx]);
  return out;
}

std::vector<std::pair<std::string, std::size_t>> cwe_frequency(
    const std::vector<VulnRecord>& records) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) ++counts[r.cwe_id];

  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

}  // namespace cverepair::corpus
