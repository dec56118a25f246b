#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stepopsd {

// Exit-code categories used by the command-line tool.
enum class ErrorCategory : int {
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kParse = 5,
  kConsistency = 6,
  kNumerical = 7,
  kVerification = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::kConfig, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::kIo, what) {}
};

// Carries the byte offset (within the offending line) and, when known, the
// 1-based line number of a malformed input.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset, std::size_t line = 0);

  std::size_t byte_offset() const noexcept { return byte_offset_; }
  std::size_t line() const noexcept { return line_; }
  // Message without the location prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t byte_offset_;
  std::size_t line_;
};

class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& what)
      : Error(ErrorCategory::kConsistency, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorCategory::kNumerical, what) {}
};

}  // namespace stepopsd
