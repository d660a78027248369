#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sasskit/profile.hpp"
#include "sasskit/sass.hpp"

namespace sasskit {

enum class Severity { Info, Warn, Perf };
std::string_view to_string(Severity s);

struct LintRule {
  std::string id;
  char letter = 'a';
  Severity severity = Severity::Info;
  std::vector<Generation> applies_to;
  std::string summary;
};

/// Built-in rules in letter order.
const std::vector<LintRule>& lint_rules();

/// Accepts rule ids or letters, comma separated; empty selects every rule.
std::vector<std::string> resolve_rules(std::string_view selection);

struct Finding {
  std::string rule;
  Severity severity = Severity::Info;
  std::size_t index = 0;
  std::optional<std::uint64_t> address;
  std::string message;
  std::optional<std::string> suggestion;
};

struct ReportDocument {
  std::vector<Finding> findings;
  std::map<std::string, int> summary;  // findings per rule id
};

ReportDocument lint(const Program& program, const GpuArchProfile& profile,
                    const std::vector<std::string>& rules = {});

}  // namespace sasskit
