#pragma once

#include <stdexcept>
#include <string>

namespace cverepair {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad or missing configuration (paths, ranges, unknown labels).
class ConfigError : public Error {
public:
  using Error::Error;
};

// The input database does not have the expected tables/columns.
// The message names the offending table.
class SchemaError : public Error {
public:
  using Error::Error;
};

// Unknown tokenizer id.
class TokenizerError : public Error {
public:
  using Error::Error;
};

// Chat session would not fit in the model's context window.
class ContextOverflow : public Error {
public:
  using Error::Error;
};

// HTTP transport failure after retry exhaustion.
class TransportError : public Error {
public:
  using Error::Error;
};

// Replay cassette exhausted or fingerprint disagreement.
class ReplayMismatch : public Error {
public:
  using Error::Error;
};

// codebleu() was asked to compare two empty inputs.
class EmptyComparison : public Error {
public:
  using Error::Error;
};

// apply_patch() could not localize or splice the target function.
class PatchError : public Error {
public:
  enum class Kind { NotFound, MultipleDefinitions, BraceMismatch };

  PatchError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

private:
  Kind kind_;
};

}  // namespace cverepair
