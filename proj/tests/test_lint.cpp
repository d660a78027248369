#include "doctest.h"

#include "fixtures.hpp"
#include "sasskit/error.hpp"
#include "sasskit/lint.hpp"

using namespace sasskit;

namespace {

int count(const ReportDocument& d, const std::string& rule) {
  int n = 0;
  for (const auto& f : d.findings) n += f.rule == rule;
  return n;
}

Program turing(const std::string& text) {
  ParseOptions opt;
  opt.arch = Generation::Turing;
  return parse_listing(text, opt);
}

}  // namespace

TEST_CASE("rule selection") {
  CHECK(resolve_rules("").size() == 4);
  CHECK(resolve_rules("a,bank-conflict,a") ==
        std::vector<std::string>{"narrow-global-access", "bank-conflict"});
  try {
    resolve_rules("e");
    FAIL("expected UnknownRuleId");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownRuleId);
  }
}

TEST_CASE("saxpy listings") {
  const auto t4 = builtin_profile("T4");
  const auto bad = lint(parse_listing(fixture("saxpy_cublas.sass")), t4, {"narrow-global-access"});
  CHECK(count(bad, "narrow-global-access") == 4);
  CHECK(bad.summary.at("narrow-global-access") == 4);
  REQUIRE(bad.findings[0].suggestion);
  CHECK(bad.findings[0].suggestion->find("LDG.E.128.SYS") != std::string::npos);
  const auto good = lint(parse_listing(fixture("saxpy_improved.sass")), t4);
  CHECK(count(good, "narrow-global-access") == 0);
}

TEST_CASE("backward branch marks a loop") {
  const auto t4 = builtin_profile("T4");
  const auto p = turing(
      "/*0000*/ LDG.E.SYS R2, [R4] ;\n"
      "/*0010*/ FADD R0, R0, R2 ;\n"
      "/*0020*/ BRA 0x0 ;\n");
  const auto d = lint(p, t4, {"a"});
  REQUIRE(d.findings.size() == 1);
  CHECK(d.findings[0].message.find("loop") != std::string::npos);
}

TEST_CASE("bank-conflict and reuse findings") {
  const auto t4 = builtin_profile("T4");
  const auto p = turing("/*0000*/ FFMA R6, R97, R99, R1 ;\n/*0010*/ FFMA R8, R97, R2, R4 ;\n");
  const auto d = lint(p, t4);
  CHECK(count(d, "bank-conflict") == 1);
  CHECK(count(d, "reuse-opportunity") == 1);
  CHECK(d.findings[0].address == 0);
  CHECK(d.findings[0].rule == "bank-conflict");
}

TEST_CASE("control anomalies") {
  const auto t4 = builtin_profile("T4");
  auto p = turing("/*0000*/ FFMA R0, R1, R2, R3 ;\n/*0010*/ FADD R4, R0, R5 ;\n");
  ControlInfo waits;
  waits.wait_mask = 0b10;
  p.controls = std::vector<ControlInfo>{ControlInfo{}, waits};
  const auto d = lint(p, t4, {"d"});
  CHECK(count(d, "control-anomaly") == 2);
  p.controls.reset();
  CHECK(lint(p, t4, {"d"}).findings.empty());
}

TEST_CASE("Kepler skips reuse rules") {
  const auto k80 = builtin_profile("K80");
  ParseOptions opt;
  opt.arch = Generation::Kepler;
  const auto p = parse_listing("FFMA R6, R97, R99, R1 ;\nFFMA R8, R97, R2, R4 ;\n", opt);
  CHECK(lint(p, k80, {"c"}).findings.empty());
}
