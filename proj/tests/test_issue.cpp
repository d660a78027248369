#include "doctest.h"

#include "sasskit/error.hpp"
#include "sasskit/issue.hpp"

using namespace sasskit;

namespace {

Program turing(const std::string& text, std::vector<ControlInfo> controls = {}) {
  ParseOptions opt;
  opt.arch = Generation::Turing;
  auto p = parse_listing(text, opt);
  if (!controls.empty()) p.controls = std::move(controls);
  return p;
}

ControlInfo ctl(int stall, bool yield = true, int write = kNoBarrier, std::uint8_t wait = 0) {
  ControlInfo c;
  c.stall = static_cast<std::uint8_t>(stall);
  c.yield = yield;
  c.write_barrier = static_cast<std::uint8_t>(write);
  c.wait_mask = wait;
  return c;
}

ScheduleOptions no_conflicts() {
  ScheduleOptions o;
  o.model_conflicts = false;
  return o;
}

}  // namespace

TEST_CASE("scheduler_of") {
  CHECK(scheduler_of(0) == 0);
  CHECK(scheduler_of(4) == 0);
  CHECK(scheduler_of(7) == 3);
  CHECK(scheduler_of(5, 2) == 1);
}

TEST_CASE("stall and yield spacing") {
  const auto t4 = builtin_profile("T4");
  const auto p = turing("FADD R0, R1, R2 ;\nFADD R3, R4, R5 ;\nFADD R6, R7, R8 ;\n",
                        {ctl(3), ctl(0, false), ctl(1)});
  const auto t = schedule_warp(p, t4, no_conflicts());
  CHECK(t.entries[0].issue_cycle == 0);
  CHECK(t.entries[1].issue_cycle == 3);
  CHECK(t.entries[2].issue_cycle == 5);
  CHECK(t.total_cycles == 5 + 4);
  CHECK(t.hazards.empty());
}

TEST_CASE("barrier wait") {
  const auto t4 = builtin_profile("T4");
  const auto p = turing("LDG.E.SYS R0, [R2] ;\nFADD R3, R0, R5 ;\n",
                        {ctl(1, true, 0), ctl(1, true, kNoBarrier, 0b1)});
  const auto t = schedule_warp(p, t4, no_conflicts());
  CHECK(t.entries[1].issue_cycle == 32);
  CHECK(t.entries[1].stall_source == StallSource::BarrierWait);
  ScheduleOptions far = no_conflicts();
  far.memory_class = "TLB-miss";
  CHECK(schedule_warp(p, t4, far).entries[1].issue_cycle == 616);
}

TEST_CASE("hazards are reported, not enforced") {
  const auto t4 = builtin_profile("T4");
  const auto p = turing("FFMA R0, R1, R2, R3 ;\nFADD R4, R0, R5 ;\n", {ctl(1), ctl(1)});
  const auto t = schedule_warp(p, t4, no_conflicts());
  CHECK(t.entries[1].issue_cycle == 1);
  REQUIRE(t.hazards.size() == 1);
  CHECK(t.hazards[0].reg == 0);
  CHECK(t.hazards[0].ready_cycle == 4);
}

TEST_CASE("bank conflicts delay issue") {
  const auto t4 = builtin_profile("T4");
  const auto p = turing("FFMA R6, R97, R99, R1 ;\nFFMA R8, R2, R4, R10 ;\n", {ctl(1), ctl(1)});
  const auto t = schedule_warp(p, t4);
  CHECK(t.entries[0].conflict_cycles == 1);
  CHECK(t.entries[0].issue_cycle == 1);
}

TEST_CASE("default controls") {
  const auto t4 = builtin_profile("T4");
  const auto p = turing("LDG.E.SYS R0, [R2] ;\nFFMA R3, R0, R5, R6 ;\nFADD R7, R3, R3 ;\n");
  const auto c = default_controls(p, t4);
  CHECK(c[0].has_write_barrier());
  CHECK(c[1].waits_on(c[0].write_barrier));
  CHECK(c[1].stall == 4);
  CHECK(schedule_warp(p, t4, no_conflicts()).hazards.empty());
}

TEST_CASE("strict mode") {
  const auto t4 = builtin_profile("T4");
  ScheduleOptions o;
  o.strict = true;
  const auto p = turing("FROB R0, R1 ;\n");
  try {
    schedule_warp(p, t4, o);
    FAIL("expected UnresolvedLatency");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnresolvedLatency);
  }
}

TEST_CASE("minimal stall") {
  const auto t4 = builtin_profile("T4");
  CHECK(minimal_correct_stall("FFMA", t4) == 4);
  CHECK(minimal_correct_stall("IMAD", t4) == 5);
  CHECK(minimal_correct_stall("HADD2", t4) == 6);
  CHECK(minimal_correct_stall("DFMA", t4) == 54);
}

TEST_CASE("multiwarp collisions") {
  const auto t4 = builtin_profile("T4");
  std::string text;
  for (int i = 0; i < 32; ++i) text += "FFMA R" + std::to_string(i % 8) + ", R8, R10, R12 ;\n";
  const auto p = turing(text, std::vector<ControlInfo>(32, ctl(1)));
  const auto apart = simulate_multiwarp({{0, p}, {1, p}}, t4, no_conflicts());
  const auto same = simulate_multiwarp({{0, p}, {4, p}}, t4, no_conflicts());
  CHECK(apart.schedulers.size() == 2);
  CHECK(same.schedulers.size() == 1);
  CHECK(same.aggregate_ipc < apart.aggregate_ipc);
  REQUIRE(apart.gflops);
  CHECK(*apart.gflops == doctest::Approx(apart.aggregate_ipc * 64 * 2 * 1590 / 1000.0));
}
