#pragma once

#include <stdexcept>
#include <string>

namespace prunekit {

// Error taxonomy shared by the library and the CLI. The CLI prints
// "error: <code>: <detail>" and exits with exit_code().
class Error : public std::runtime_error {
 public:
  Error(std::string code, int exit_code, const std::string& detail)
      : std::runtime_error(detail), code_(std::move(code)), exit_code_(exit_code) {}

  const std::string& code() const { return code_; }
  int exit_code() const { return exit_code_; }

 private:
  std::string code_;
  int exit_code_;
};

// Bad user input: malformed config, unknown arch, out-of-range rate.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& detail) : Error("config", 2, detail) {}
};

// Training blew up (non-finite loss).
class RuntimeAbort : public Error {
 public:
  explicit RuntimeAbort(const std::string& detail) : Error("abort", 3, detail) {}
};

// A stated invariant or precondition was violated.
class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& detail) : Error("invariant", 4, detail) {}
};

// Tensor shape mismatch. A species of invariant violation.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& detail) : Error("invariant", 4, detail) {}
};

}  // namespace prunekit
