#pragma once

#include <stdexcept>
#include <string>

namespace mcdbn {

// All library failures derive from Error and carry a short machine-readable
// category. The CLI maps categories to exit codes and prints them as
// "ERROR:<category>:<message>".
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

// Dimension mismatch between operands; message names both shapes.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("shape", message) {}
};

// Value outside the operation's admissible domain (e.g. probability > 1).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message) : Error("domain", message) {}
};

// Invalid configuration value (zero epoch count, negative learning rate, ...).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

// Malformed input data (CSV parse failures, unsorted timestamps, bad labels).
class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error("data", message) {}
};

// Non-finite values produced where the pipeline requires finite ones.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message) : Error("numeric", message) {}
};

// Corrupt or incompatible checkpoint file.
class CheckpointError : public Error {
 public:
  explicit CheckpointError(const std::string& message) : Error("checkpoint", message) {}
};

// Bad command line invocation.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error("usage", message) {}
};

}  // namespace mcdbn
