#pragma once

#include <stdexcept>
#include <string>

namespace starqa {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI's error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Input violates a documented invariant (empty label, duplicate sibling, ...).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message) : Error("validation", message) {}
};

/// Input could not be parsed at all.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message) : Error("parse", message) {}
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message) : Error("not_found", message) {}
};

/// A persisted artifact is truncated, malformed, or belongs to another input.
class CorruptFileError : public Error {
 public:
  explicit CorruptFileError(const std::string& message) : Error("corrupt_file", message) {}
};

class VersionMismatchError : public Error {
 public:
  explicit VersionMismatchError(const std::string& message) : Error("version_mismatch", message) {}
};

/// Two artifacts that must agree (corpus hash, embedder id, ...) do not.
class MismatchError : public Error {
 public:
  explicit MismatchError(const std::string& message) : Error("mismatch", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

}  // namespace starqa
