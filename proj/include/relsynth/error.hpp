#pragma once

#include <stdexcept>
#include <string>

namespace relsynth {

/// Broad failure classes. The CLI maps each onto a process exit code.
enum class ErrorKind {
  kConfig = 2,
  kEndpoint = 3,
  kData = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Missing files, malformed config, bad arguments.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

/// Input data that violates a dataset invariant (dangling keys, cycles, bad cells).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

/// Transport failure, HTTP error or protocol problem talking to the completion endpoint.
class EndpointError : public Error {
 public:
  explicit EndpointError(const std::string& what) : Error(ErrorKind::kEndpoint, what) {}
};

/// The endpoint refused the structured-output schema itself.
class SchemaRejectedError : public EndpointError {
 public:
  explicit SchemaRejectedError(const std::string& what) : EndpointError(what) {}
};

/// The model stopped because it ran out of tokens, or the prompt did not fit.
class TokenLimitError : public EndpointError {
 public:
  explicit TokenLimitError(const std::string& what) : EndpointError(what) {}
};

/// Response text is not JSON although a schema was requested.
class StructuredOutputError : public EndpointError {
 public:
  explicit StructuredOutputError(const std::string& what) : EndpointError(what) {}
};

/// A generated document parsed as JSON but does not conform to the entity schema.
class SchemaViolation : public DataError {
 public:
  explicit SchemaViolation(const std::string& what) : DataError(what) {}
};

}  // namespace relsynth
