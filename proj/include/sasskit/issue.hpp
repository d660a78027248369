#pragma once

// Static issue model of one or more warps on software-scheduled pipelines.

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "sasskit/profile.hpp"
#include "sasskit/sass.hpp"

namespace sasskit {

int scheduler_of(int warp_id, int schedulers = 4);

enum class StallSource { StallField, BarrierWait, Conflict };
std::string_view to_string(StallSource s);

struct TimelineEntry {
  std::size_t index = 0;
  std::optional<std::uint64_t> address;
  std::string opcode;
  std::string latency_class;
  int latency = 0;
  std::int64_t issue_cycle = 0;
  std::int64_t complete_cycle = 0;
  StallSource stall_source = StallSource::StallField;
  int conflict_cycles = 0;
};

/// A consumer that issued before its producer's result was ready.
struct Hazard {
  std::size_t producer = 0;
  std::size_t consumer = 0;
  int reg = 0;
  std::int64_t ready_cycle = 0;
  std::int64_t issue_cycle = 0;
};

struct Timeline {
  std::vector<TimelineEntry> entries;
  std::vector<Hazard> hazards;
  std::vector<ControlInfo> controls;  // as simulated, after defaulting
  std::int64_t total_cycles = 0;
  double cpi = 0.0;
};

struct ScheduleOptions {
  // Class that LDG/LD/LDL resolve to: L1-hit, L2-hit, L2-miss-TLB-hit, TLB-miss.
  std::string memory_class = "L1-hit";
  int read_hold = 1;
  bool strict = false;            // unknown opcodes raise UnresolvedLatency
  bool model_conflicts = true;
  bool dual_issue = false;
  // Which control sections pair the instruction with its successor.
  std::function<bool(const ControlInfo&)> dual_issue_predicate;
};

/// Controls a compiler would plausibly emit when a listing carries none:
/// fixed latencies up to 15 go into the stall field, everything else gets a
/// round-robin write barrier awaited by its consumers.
std::vector<ControlInfo> default_controls(const Program& program, const GpuArchProfile& profile,
                                          const ScheduleOptions& options = {});

/// Latency class and cycles of one instruction under the given options.
std::pair<std::string, LatencyEntry> resolve_latency(const Instruction& instr,
                                                     const GpuArchProfile& profile,
                                                     const ScheduleOptions& options = {});

Timeline schedule_warp(const Program& program, const GpuArchProfile& profile,
                       const ScheduleOptions& options = {});

struct WarpProgram {
  int warp_id = 0;
  Program program;
};

struct SchedulerStats {
  int scheduler = 0;
  std::vector<int> warps;
  std::int64_t instructions = 0;
  std::int64_t busy_until = 0;
  double ipc = 0.0;
};

struct MultiwarpResult {
  std::vector<SchedulerStats> schedulers;
  std::int64_t total_instructions = 0;
  std::int64_t total_cycles = 0;
  double aggregate_ipc = 0.0;
  // Only for programs made entirely of FFMA: IPC x 64 lanes x 2 flops x f_g.
  std::optional<double> gflops;
};

MultiwarpResult simulate_multiwarp(const std::vector<WarpProgram>& warps,
                                   const GpuArchProfile& profile,
                                   const ScheduleOptions& options = {});

/// Smallest stall on a producer that keeps a dependent consumer from reading
/// a stale result; stalls above 15 are realized with NOP padding.
int minimal_correct_stall(std::string_view producer_opcode, const GpuArchProfile& profile,
                          const ScheduleOptions& options = {});

}  // namespace sasskit
