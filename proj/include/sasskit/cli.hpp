#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sasskit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitFindings = 3;
inline constexpr int kExitInput = 4;

/// Runs one command line (without the program name). Results go to `out`,
/// diagnostics to `err` as one JSON object per line.
int dispatch(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
             std::ostream& err);

}  // namespace sasskit::cli
