#include "stepopsd/errors.hpp"

namespace stepopsd {

ParseError::ParseError(const std::string& what, std::size_t byte_offset, std::size_t line)
    : Error(ErrorCategory::kParse,
            (line > 0 ? "line " + std::to_string(line) + ", " : std::string()) + "byte " +
                std::to_string(byte_offset) + ": " + what),
      detail_(what),
      byte_offset_(byte_offset),
      line_(line) {}

}  // namespace stepopsd
