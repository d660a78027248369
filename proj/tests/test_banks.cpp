#include "doctest.h"

#include "sasskit/banks.hpp"
#include "sasskit/error.hpp"
#include "sasskit/profile.hpp"

using namespace sasskit;

namespace {

Program listing(const std::string& text, Generation g) {
  ParseOptions opt;
  opt.arch = g;
  auto p = parse_listing(text, opt);
  p.controls = std::vector<ControlInfo>(p.instructions.size());
  return p;
}

int cycles(const std::string& line, const GpuArchProfile& profile) {
  return instruction_conflict_cycles(parse_instruction(line), BankModel::of(profile));
}

}  // namespace

TEST_CASE("worked cases") {
  for (const char* name : {"T4", "V100", "P100"}) {
    const auto p = builtin_profile(name);
    CHECK(cycles("FFMA R15, R11, R12, R13 ;", p) == 0);
    CHECK(cycles("FFMA R18, R10, R12, R16 ;", p) > 0);
  }
  const auto t4 = builtin_profile("T4");
  for (int x = 0; x < 128; ++x) {
    const auto rx = "R" + std::to_string(x);
    CHECK((cycles("FFMA R6, R97, R99, " + rx + " ;", t4) > 0) == (x % 2 == 1));
    CHECK(cycles("FFMA R6, R98, R99, " + rx + " ;", t4) == 0);
  }
}

TEST_CASE("register_bank") {
  const auto t4 = builtin_profile("T4");
  const auto p100 = builtin_profile("P100");
  CHECK(register_bank(7, t4) == 1);
  CHECK(register_bank(7, p100) == 3);
  try {
    register_bank(GeneralReg{kRZ}, t4);
    FAIL("expected NotBankable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotBankable);
  }
  CHECK_THROWS_AS(register_bank(UniformReg{3}, t4), Error);
}

TEST_CASE("reuse cache") {
  ReuseCacheState c;
  c.save(0, 10);
  c.save(0, 12);
  CHECK(c.contains(0, 10));
  c.save(0, 14);
  CHECK_FALSE(c.contains(0, 10));
  CHECK(c.contains(0, 12));
  CHECK(c.contains(0, 14));
  CHECK_FALSE(c.contains(1, 14));
  c.invalidate(12);
  CHECK_FALSE(c.contains(0, 12));
  c.clear();
  CHECK_FALSE(c.contains(0, 14));
}

TEST_CASE("reuse hits remove port demand") {
  const auto t4 = builtin_profile("T4");
  auto p = listing("FFMA R6, R97.reuse, R99, R1 ;\nFFMA R8, R97, R99, R1 ;\n", Generation::Turing);
  p.controls.reset();
  const auto plain = analyze_conflicts(p, t4, false);
  CHECK(plain.total_conflict_cycles == 2);
  const auto reuse = analyze_conflicts(p, t4, true);
  CHECK(reuse.instructions[1].reuse_hits == 1);
  CHECK(reuse.instructions[1].conflict_cycles == 0);
  CHECK(reuse.total_conflict_cycles == 1);
}

TEST_CASE("missing controls") {
  const auto t4 = builtin_profile("T4");
  ParseOptions opt;
  opt.arch = Generation::Turing;
  const auto p = parse_listing("FFMA R6, R97, R99, R1 ;\n", opt);
  CHECK_NOTHROW(analyze_conflicts(p, t4, false));
  try {
    analyze_conflicts(p, t4, true);
    FAIL("expected MissingControls");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingControls);
  }
}

TEST_CASE("reassign removes the odd-register conflict") {
  const auto t4 = builtin_profile("T4");
  const auto p = listing(
      "FFMA R6, R97, R99, R1 ;\n"
      "FFMA R7, R97, R99, R3 ;\n"
      "FADD R1, R1, R6 ;\n"
      "FADD R3, R3, R7 ;\n"
      "BRA 0x0 ;\n",
      Generation::Turing);
  const auto r = reassign_registers(p, t4);
  CHECK(r.before.total_conflict_cycles > 0);
  CHECK(r.after.total_conflict_cycles == 0);
  CHECK(analyze_conflicts(r.program, t4).total_conflict_cycles == 0);
  CHECK(rename_registers(p, r.renaming) == r.program);
}

TEST_CASE("reassign errors") {
  const auto t4 = builtin_profile("T4");
  const auto p = listing("FFMA R6, R97, R99, R1 ;\nCALL.REL 0x40 ;\n", Generation::Turing);
  try {
    reassign_registers(p, t4);
    FAIL("expected UnsupportedControlFlow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedControlFlow);
  }
  const auto q = listing("FFMA R6, R97, R99, R1 ;\n", Generation::Turing);
  ReassignOptions opt;
  opt.budget = 2;
  try {
    reassign_registers(q, t4, opt);
    FAIL("expected InfeasibleBudget");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InfeasibleBudget);
  }
}
