#include "sasskit/error.hpp"

namespace sasskit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownProfile: return "UnknownProfile";
    case ErrorCode::MalformedProfileFile: return "MalformedProfileFile";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NotAMemoryAccess: return "NotAMemoryAccess";
    case ErrorCode::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::InvalidField: return "InvalidField";
    case ErrorCode::BadPadding: return "BadPadding";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NotBankable: return "NotBankable";
    case ErrorCode::MissingControls: return "MissingControls";
    case ErrorCode::InfeasibleBudget: return "InfeasibleBudget";
    case ErrorCode::UnsupportedControlFlow: return "UnsupportedControlFlow";
    case ErrorCode::UnresolvedLatency: return "UnresolvedLatency";
    case ErrorCode::MalformedControls: return "MalformedControls";
    case ErrorCode::AddressBeyondModeledMemory: return "AddressBeyondModeledMemory";
    case ErrorCode::DegenerateCurve: return "DegenerateCurve";
    case ErrorCode::DegreeOutOfRange: return "DegreeOutOfRange";
    case ErrorCode::LevelUnknown: return "LevelUnknown";
    case ErrorCode::UnknownRuleId: return "UnknownRuleId";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

static std::string format_parse_message(std::size_t line, std::size_t column,
                                        const std::string& expected,
                                        const std::string& text) {
  std::string msg;
  if (line > 0) msg += "line " + std::to_string(line) + ", ";
  msg += "column " + std::to_string(column) + ": expected " + expected;
  if (!text.empty()) msg += " in '" + text + "'";
  return msg;
}

ParseError::ParseError(std::size_t line, std::size_t column,
                       std::string expected, const std::string& text)
    : Error(ErrorCode::ParseError,
            format_parse_message(line, column, expected, text)),
      line_(line),
      column_(column),
      expected_(std::move(expected)) {}

}  // namespace sasskit
