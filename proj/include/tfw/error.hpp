#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tfw {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (JSONL line, YAML document). Carries the 1-based line
/// number when known, 0 otherwise.
class ParseError : public Error {
public:
  ParseError(const std::string& message, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// A record that parsed but violates the task schema or a type invariant.
class ValidationError : public Error {
public:
  ValidationError(const std::string& sample_id, const std::string& message)
      : Error("sample '" + sample_id + "': " + message), sample_id_(sample_id) {}

  const std::string& sample_id() const noexcept { return sample_id_; }

private:
  std::string sample_id_;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

/// Template text references a placeholder that has no value.
class RenderError : public Error {
public:
  explicit RenderError(const std::string& placeholder, const std::string& where = {})
      : Error("unresolved placeholder {" + placeholder + "}" + (where.empty() ? "" : " in " + where)),
        placeholder_(placeholder) {}

  const std::string& placeholder() const noexcept { return placeholder_; }

private:
  std::string placeholder_;
};

class ReplayMissError : public Error {
public:
  explicit ReplayMissError(const std::string& fingerprint)
      : Error("replay miss: no cassette entry for fingerprint " + fingerprint), fingerprint_(fingerprint) {}

  const std::string& fingerprint() const noexcept { return fingerprint_; }

private:
  std::string fingerprint_;
};

/// HTTP failure after retries. status() is 0 when no response was received.
class TransportError : public Error {
public:
  TransportError(int status, const std::string& message)
      : Error(status ? "HTTP " + std::to_string(status) + ": " + message : message), status_(status) {}

  int status() const noexcept { return status_; }

private:
  int status_;
};

}  // namespace tfw
