#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sasskit {

enum class ErrorCode {
  UnknownProfile,
  MalformedProfileFile,
  ParseError,
  NotAMemoryAccess,
  ValueOutOfRange,
  InvalidField,
  BadPadding,
  LengthMismatch,
  NotBankable,
  MissingControls,
  InfeasibleBudget,
  UnsupportedControlFlow,
  UnresolvedLatency,
  MalformedControls,
  AddressBeyondModeledMemory,
  DegenerateCurve,
  DegreeOutOfRange,
  LevelUnknown,
  UnknownRuleId,
  UsageError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised for malformed SASS text. Line and column are 1-based; line is 0
/// when the input was a single statement rather than a listing.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, std::string expected,
             const std::string& text);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string expected_;
};

}  // namespace sasskit
