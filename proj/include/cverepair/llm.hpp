#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cverepair/tokenizer.hpp"

namespace cverepair::llm {

// Descriptive + operational data for one model endpoint. parameter_count
// is metadata only and plays no operational role.
struct ModelProfile {
  std::string name;
  std::size_t context_length = 8192;
  std::string endpoint;              // http(s) URL, or empty in replay mode
  std::string api_key_env;           // name of the env var holding the key
  double temperature = 0.2;
  std::size_t max_output_tokens = 1024;
  std::string parameter_count;       // e.g. "70B"; informational

  static ModelProfile builtin(const std::string& name);
  static const std::vector<ModelProfile>& builtin_profiles();
};

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

// Message transcript with running token accounting. Enforces the role
// discipline: optional leading system message, then strict user/assistant
// alternation.
class ChatSession {
public:
  explicit ChatSession(TokenCounter counter = TokenCounter("builtin"));

  void push(const std::string& role, std::string content);

  const std::vector<ChatMessage>& messages() const { return messages_; }
  std::size_t token_estimate() const { return token_estimate_; }

private:
  std::vector<ChatMessage> messages_;
  std::size_t token_estimate_ = 0;
  TokenCounter counter_;
};

struct CassetteEntry {
  std::string request_fingerprint;
  std::string response_text;
};

// Ordered request/response recording; replay consumes entries front to
// back, and any fingerprint disagreement raises ReplayMismatch.
struct Cassette {
  std::vector<CassetteEntry> entries;

  static Cassette load(const std::string& path);
  void save(const std::string& path) const;
};

// Stable hash of (model, temperature, messages) identifying one request.
std::string request_fingerprint(const ModelProfile& profile,
                                const std::vector<ChatMessage>& messages);

// Completion backend. complete() appends the assistant message to the
// session and returns its text. Throws ContextOverflow when the session
// estimate plus response headroom exceeds the profile's context length.
class Backend {
public:
  virtual ~Backend() = default;
  std::string complete(ChatSession& session, const ModelProfile& profile);

  // Transport-level request; exposed so wrappers can delegate.
  virtual std::string fetch(const ModelProfile& profile,
                            const std::vector<ChatMessage>& messages) = 0;
};

// Chat-completion JSON over HTTP with bounded retries (transport errors
// and 5xx only; exponential backoff). The API key is read from the
// environment variable named by the profile and never stored.
class HttpBackend : public Backend {
public:
  explicit HttpBackend(int max_attempts = 3, int initial_backoff_ms = 1000);

  std::string fetch(const ModelProfile& profile,
                    const std::vector<ChatMessage>& messages) override;

private:
  int max_attempts_;
  int initial_backoff_ms_;
};

class ReplayBackend : public Backend {
public:
  explicit ReplayBackend(Cassette cassette);

  std::size_t remaining() const { return cassette_.entries.size() - cursor_; }

  std::string fetch(const ModelProfile& profile,
                    const std::vector<ChatMessage>& messages) override;

private:
  Cassette cassette_;
  std::size_t cursor_ = 0;
};

// Wraps another backend and accumulates a cassette of everything that
// passes through.
class RecordingBackend : public Backend {
public:
  explicit RecordingBackend(std::unique_ptr<Backend> inner);

  const Cassette& cassette() const { return cassette_; }

  std::string fetch(const ModelProfile& profile,
                    const std::vector<ChatMessage>& messages) override;

private:
  std::unique_ptr<Backend> inner_;
  Cassette cassette_;
};

}  // namespace cverepair::llm
