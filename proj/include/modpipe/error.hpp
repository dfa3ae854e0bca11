#pragma once

#include <stdexcept>
#include <string>

namespace modpipe {

/// Broad failure categories. The CLI maps each one to a distinct exit code.
enum class ErrorCategory {
  kUsage,
  kParse,
  kValidation,
  kInput,
  kContractViolation,
  kTransport,
  kMissingFixture,
  kMissingInput,
  kTraining,
  kInternal,
};

const char* to_string(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error(ErrorCategory::kUsage, message) {}
};

/// Malformed input line. `line()` is 1-based; 0 when not tied to a file.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line = 0)
      : Error(ErrorCategory::kParse,
              line == 0 ? message : "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorCategory::kValidation, message) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& message) : Error(ErrorCategory::kInput, message) {}
};

class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& message)
      : Error(ErrorCategory::kContractViolation, message) {}
};

class TransportError : public Error {
 public:
  TransportError(const std::string& message, bool retriable)
      : Error(ErrorCategory::kTransport, message), retriable_(retriable) {}

  bool retriable() const noexcept { return retriable_; }

 private:
  bool retriable_;
};

class MissingFixtureError : public Error {
 public:
  explicit MissingFixtureError(const std::string& message)
      : Error(ErrorCategory::kMissingFixture, message) {}
};

class MissingInputError : public Error {
 public:
  explicit MissingInputError(const std::string& message)
      : Error(ErrorCategory::kMissingInput, message) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& message) : Error(ErrorCategory::kTraining, message) {}
};

/// A predictor answered, but the text could not be mapped onto one label.
/// Carries the raw response so the caller can decide on a fallback.
class LabelParseError : public Error {
 public:
  LabelParseError(const std::string& message, std::string raw_text)
      : Error(ErrorCategory::kParse, message), raw_text_(std::move(raw_text)) {}

  const std::string& raw_text() const noexcept { return raw_text_; }

 private:
  std::string raw_text_;
};

}  // namespace modpipe
