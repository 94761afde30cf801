#include "cverepair/llm.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cverepair/errors.hpp"

namespace cverepair::llm {
namespace {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint is not a URL: " + endpoint);
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {endpoint, "/v1/chat/completions"};
  }
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

// ---- profiles -----------------------------------------------------------

const std::vector<ModelProfile>& ModelProfile::builtin_profiles() {
  static const std::vector<ModelProfile> profiles = [] {
    std::vector<ModelProfile> p(4);
    p[0].name = "gpt-3.5";
    p[0].context_length = 16385;
    p[0].parameter_count = "175B";
    p[1].name = "gpt-4o";
    p[1].context_length = 128000;
    p[1].parameter_count = ">1760B";
    p[2].name = "llama-3-8b";
    p[2].context_length = 8192;
    p[2].parameter_count = "8B";
    p[3].name = "llama-3-70b";
    p[3].context_length = 8192;
    p[3].parameter_count = "70B";
    return p;
  }();
  return profiles;
}

ModelProfile ModelProfile::builtin(const std::string& name) {
  for (const auto& p : builtin_profiles()) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown builtin model profile: " + name);
}

// ---- chat session ---------------------------------------------------------

namespace {
// Flat per-message overhead covering role markup in the wire format.
constexpr std::size_t kPerMessageOverhead = 4;
}  // namespace

ChatSession::ChatSession(TokenCounter counter) : counter_(std::move(counter)) {}

void ChatSession::push(const std::string& role, std::string content) {
  const bool empty = messages_.empty();
  if (role == "system") {
    if (!empty) throw Error("system message only allowed first");
  } else if (role == "user" || role == "assistant") {
    std::string prev = empty ? "" : messages_.back().role;
    if (prev == "system") prev = "";
    const std::string expected = prev == "user" ? "assistant" : "user";
    if (role != expected) {
      throw Error("chat roles must alternate: got '" + role + "' after '" +
                  (empty ? "<none>" : messages_.back().role) + "'");
    }
  } else {
    throw Error("unknown chat role: " + role);
  }
  token_estimate_ += counter_.count(content) + kPerMessageOverhead;
  messages_.push_back({role, std::move(content)});
}

// ---- fingerprints & cassettes ---------------------------------------------

std::string request_fingerprint(const ModelProfile& profile,
                                const std::vector<ChatMessage>& messages) {
  char temp[32];
  std::snprintf(temp, sizeof(temp), "%.6g", profile.temperature);
  std::uint64_t h = fnv1a64(profile.name);
  h = fnv1a64("\x1e", h);
  h = fnv1a64(temp, h);
  for (const auto& m : messages) {
    h = fnv1a64("\x1e", h);
    h = fnv1a64(m.role, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(m.content, h);
  }
  return to_hex(h);
}

Cassette Cassette::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open cassette: " + path);
  Cassette c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      c.entries.push_back({j.at("request_fingerprint").get<std::string>(),
                           j.at("response_text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error("cassette " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

void Cassette::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write cassette: " + path);
  for (const auto& e : entries) {
    nlohmann::json j;
    j["request_fingerprint"] = e.request_fingerprint;
    j["response_text"] = e.response_text;
    out << j.dump() << '\n';
  }
  if (!out) throw Error("cassette write failed: " + path);
}

// ---- backends --------------------------------------------------------------

std::string Backend::complete(ChatSession& session, const ModelProfile& profile) {
  if (profile.context_length == 0) throw ConfigError("context_length must be > 0");
  if (session.token_estimate() + profile.max_output_tokens > profile.context_length) {
    throw ContextOverflow("session estimate " + std::to_string(session.token_estimate()) +
                          " + headroom " + std::to_string(profile.max_output_tokens) +
                          " exceeds context length " + std::to_string(profile.context_length) +
                          " of " + profile.name);
  }
  std::string text = fetch(profile, session.messages());
  session.push("assistant", text);
  return text;
}

HttpBackend::HttpBackend(int max_attempts, int initial_backoff_ms)
    : max_attempts_(max_attempts), initial_backoff_ms_(initial_backoff_ms) {}

std::string HttpBackend::fetch(const ModelProfile& profile,
                               const std::vector<ChatMessage>& messages) {
  const ParsedUrl url = parse_endpoint(profile.endpoint);

  nlohmann::json body;
  body["model"] = profile.name;
  body["temperature"] = profile.temperature;
  body["max_tokens"] = profile.max_output_tokens;
  auto& msgs = body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});

  httplib::Headers headers;
  if (!profile.api_key_env.empty()) {
    if (const char* key = std::getenv(profile.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  std::string last_error;
  int backoff_ms = initial_backoff_ms_;
  for (int attempt = 0; attempt < max_attempts_; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms *= 2;
    }
    httplib::Client client(url.base);
    client.set_read_timeout(120, 0);
    auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;  // retryable
    }
    if (res->status >= 500) {
      last_error = "server error: HTTP " + std::to_string(res->status);
      continue;  // retryable
    }
    if (res->status != 200) {
      throw TransportError("HTTP " + std::to_string(res->status) + " from " + url.base);
    }
    try {
      auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed completion response: ") + e.what());
    }
  }
  throw TransportError("retries exhausted: " + last_error);
}

ReplayBackend::ReplayBackend(Cassette cassette) : cassette_(std::move(cassette)) {}

std::string ReplayBackend::fetch(const ModelProfile& profile,
                                 const std::vector<ChatMessage>& messages) {
  if (cursor_ >= cassette_.entries.size()) {
    throw ReplayMismatch("cassette exhausted after " + std::to_string(cursor_) + " entries");
  }
  const CassetteEntry& entry = cassette_.entries[cursor_];
  const std::string fp = request_fingerprint(profile, messages);
  if (fp != entry.request_fingerprint) {
    throw ReplayMismatch("cassette entry " + std::to_string(cursor_) +
                         " fingerprint mismatch: expected " + entry.request_fingerprint +
                         ", request hashes to " + fp);
  }
  ++cursor_;
  return entry.response_text;
}

RecordingBackend::RecordingBackend(std::unique_ptr<Backend> inner) : inner_(std::move(inner)) {}

std::string RecordingBackend::fetch(const ModelProfile& profile,
                                    const std::vector<ChatMessage>& messages) {
  std::string response = inner_->fetch(profile, messages);
  cassette_.entries.push_back({request_fingerprint(profile, messages), response});
  return response;
}

}  // namespace cverepair::llm
