#include "sasskit/issue.hpp"

#include <algorithm>
#include <map>

#include "sasskit/banks.hpp"
#include "sasskit/error.hpp"

namespace sasskit {

int scheduler_of(int warp_id, int schedulers) { return warp_id % schedulers; }

std::string_view to_string(StallSource s) {
  switch (s) {
    case StallSource::StallField: return "stall";
    case StallSource::BarrierWait: return "barrier";
    case StallSource::Conflict: return "conflict";
  }
  return "stall";
}

std::pair<std::string, LatencyEntry> resolve_latency(const Instruction& in,
                                                     const GpuArchProfile& p,
                                                     const ScheduleOptions& opt) {
  if (opt.strict && !p.opcode_classes.contains(in.opcode))
    throw Error(ErrorCode::UnresolvedLatency, "no latency class for opcode " + in.opcode);
  auto cls = p.class_of(in.opcode);
  if (cls == "global-load") cls = opt.memory_class;
  const auto* e = p.latency(cls);
  if (!e)
    throw Error(ErrorCode::UnresolvedLatency,
                "latency class '" + cls + "' is not in profile " + p.name);
  return {cls, *e};
}

namespace {

bool reads_register(const Instruction& in, int reg) {
  for (const auto& u : source_registers(in))
    if (reg >= u.base && reg < u.base + u.count) return true;
  return false;
}

bool writes_register(const Instruction& in, int reg) {
  for (const auto& u : destination_registers(in))
    if (reg >= u.base && reg < u.base + u.count) return true;
  return false;
}

bool has_reuse_info(const Program& p) {
  if (p.controls) return true;
  for (const auto& in : p.instructions)
    for (const auto& op : in.operands)
      if (op.has_attribute("reuse")) return true;
  return false;
}

void check_controls(const Program& p) {
  if (!p.controls) return;
  if (p.controls->size() != p.instructions.size())
    throw Error(ErrorCode::MalformedControls,
                std::to_string(p.controls->size()) + " control sections for " +
                    std::to_string(p.instructions.size()) + " instructions");
  for (std::size_t i = 0; i < p.controls->size(); ++i) {
    const auto& c = (*p.controls)[i];
    if (c.read_barrier == 6 || c.write_barrier == 6)
      throw Error(ErrorCode::MalformedControls,
                  "instruction " + std::to_string(i) + " sets barrier 6, which does not exist");
    if (c.stall > kMaxStall || c.wait_mask > 0x3F)
      throw Error(ErrorCode::MalformedControls,
                  "instruction " + std::to_string(i) + " has out-of-range control fields");
  }
}

// Issue state of one warp walking its program in order.
class WarpRun {
 public:
  WarpRun(const Program& p, const GpuArchProfile& profile, const ScheduleOptions& opt)
      : prog_(p), opt_(opt) {
    check_controls(p);
    ctl_ = p.controls ? *p.controls : default_controls(p, profile, opt);
    for (const auto& in : p.instructions) lat_.push_back(resolve_latency(in, profile, opt));
    conflicts_.assign(p.instructions.size(), 0);
    if (opt.model_conflicts) {
      const auto rep = analyze_conflicts(p, profile, has_reuse_info(p));
      for (std::size_t i = 0; i < rep.instructions.size(); ++i)
        conflicts_[i] = rep.instructions[i].conflict_cycles;
    }
    pending_.fill(0);
  }

  bool done() const { return next_ >= prog_.instructions.size(); }
  std::size_t size() const { return prog_.instructions.size(); }

  std::int64_t earliest(StallSource* why = nullptr) const {
    const auto& c = ctl_[next_];
    std::int64_t barrier = 0;
    for (int b = 0; b < kNumBarriers; ++b)
      if (c.waits_on(b)) barrier = std::max(barrier, pending_[static_cast<std::size_t>(b)]);
    const std::int64_t t = std::max(gap_ready_, barrier) + conflicts_[next_];
    if (why)
      *why = conflicts_[next_] > 0 ? StallSource::Conflict
             : barrier > gap_ready_ ? StallSource::BarrierWait
                                    : StallSource::StallField;
    return t;
  }

  void issue(std::int64_t cycle) {
    const auto i = next_;
    const auto& in = prog_.instructions[i];
    const auto& c = ctl_[i];
    TimelineEntry e;
    e.index = i;
    e.address = in.address;
    e.opcode = in.opcode;
    e.latency_class = lat_[i].first;
    e.latency = lat_[i].second.cycles;
    earliest(&e.stall_source);
    e.issue_cycle = cycle;
    e.complete_cycle = cycle + e.latency;
    e.conflict_cycles = conflicts_[i];

    for (const auto& u : source_registers(in))
      for (int k = 0; k < u.count; ++k) {
        auto it = ready_.find(u.base + k);
        if (it != ready_.end() && it->second.first > cycle)
          hazards_.push_back({it->second.second, i, u.base + k, it->second.first, cycle});
      }
    for (const auto& d : destination_registers(in))
      for (int k = 0; k < d.count; ++k) ready_[d.base + k] = {e.complete_cycle, i};

    if (c.has_write_barrier())
      pending_[c.write_barrier] = std::max(pending_[c.write_barrier], e.complete_cycle);
    if (c.has_read_barrier())
      pending_[c.read_barrier] = std::max(pending_[c.read_barrier], cycle + opt_.read_hold);

    const bool pair = opt_.dual_issue && !paired_ && opt_.dual_issue_predicate &&
                      opt_.dual_issue_predicate(c);
    paired_ = pair;
    gap_ready_ = pair ? cycle : cycle + std::max<int>(c.stall, 1) + (c.yield ? 0 : 1);
    entries_.push_back(e);
    ++next_;
  }

  Timeline finish() {
    Timeline t;
    t.entries = std::move(entries_);
    t.hazards = std::move(hazards_);
    t.controls = ctl_;
    for (const auto& e : t.entries) t.total_cycles = std::max(t.total_cycles, e.complete_cycle);
    t.cpi = t.entries.empty() ? 0.0
                              : static_cast<double>(t.total_cycles) /
                                    static_cast<double>(t.entries.size());
    return t;
  }

 private:
  const Program& prog_;
  const ScheduleOptions& opt_;
  std::vector<ControlInfo> ctl_;
  std::vector<std::pair<std::string, LatencyEntry>> lat_;
  std::vector<int> conflicts_;
  std::array<std::int64_t, kNumBarriers> pending_{};
  std::map<int, std::pair<std::int64_t, std::size_t>> ready_;
  std::vector<TimelineEntry> entries_;
  std::vector<Hazard> hazards_;
  std::size_t next_ = 0;
  std::int64_t gap_ready_ = 0;
  bool paired_ = false;
};

}  // namespace

std::vector<ControlInfo> default_controls(const Program& p, const GpuArchProfile& profile,
                                          const ScheduleOptions& opt) {
  const auto& ins = p.instructions;
  std::vector<ControlInfo> out(ins.size());
  int next_barrier = 0;
  for (std::size_t i = 0; i < ins.size(); ++i) {
    const auto [cls, lat] = resolve_latency(ins[i], profile, opt);
    auto& c = out[i];
    if (!lat.variable && lat.cycles <= kMaxStall) {
      c.stall = static_cast<std::uint8_t>(std::max(1, lat.cycles));
      continue;
    }
    c.stall = 1;
    const auto dsts = destination_registers(ins[i]);
    if (dsts.empty()) continue;
    const auto b = static_cast<std::uint8_t>(next_barrier++ % kNumBarriers);
    c.write_barrier = b;
    // The first reader of any destination register waits; later readers
    // issue after it anyway.
    for (const auto& d : dsts)
      for (int k = 0; k < d.count; ++k) {
        const int reg = d.base + k;
        for (std::size_t j = i + 1; j < ins.size(); ++j) {
          if (reads_register(ins[j], reg)) {
            out[j].wait_mask |= static_cast<std::uint8_t>(1u << b);
            break;
          }
          if (writes_register(ins[j], reg)) break;
        }
      }
  }
  return out;
}

Timeline schedule_warp(const Program& program, const GpuArchProfile& profile,
                       const ScheduleOptions& opt) {
  WarpRun run(program, profile, opt);
  while (!run.done()) run.issue(run.earliest());
  return run.finish();
}

MultiwarpResult simulate_multiwarp(const std::vector<WarpProgram>& warps,
                                   const GpuArchProfile& profile, const ScheduleOptions& opt) {
  const int nsched = std::max(1, profile.schedulers_per_sm);
  std::vector<WarpRun> runs;
  runs.reserve(warps.size());
  for (const auto& w : warps) runs.emplace_back(w.program, profile, opt);

  MultiwarpResult res;
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(nsched));
  for (std::size_t w = 0; w < warps.size(); ++w)
    members[static_cast<std::size_t>(scheduler_of(warps[w].warp_id, nsched))].push_back(w);
  std::vector<std::size_t> rr(static_cast<std::size_t>(nsched), 0);
  std::vector<std::int64_t> issued(static_cast<std::size_t>(nsched), 0);

  std::int64_t cycle = 0;
  for (;;) {
    bool any_left = false;
    bool any_issued = false;
    std::int64_t next_event = INT64_MAX;
    for (std::size_t s = 0; s < members.size(); ++s) {
      const auto& m = members[s];
      for (std::size_t k = 0; k < m.size(); ++k) {
        const auto w = m[(rr[s] + k) % m.size()];
        if (runs[w].done()) continue;
        any_left = true;
        const auto t = runs[w].earliest();
        if (t <= cycle) {
          runs[w].issue(cycle);
          ++issued[s];
          rr[s] = (rr[s] + k + 1) % m.size();
          any_issued = true;
          break;
        }
        next_event = std::min(next_event, t);
      }
    }
    if (!any_left) break;
    cycle = any_issued ? cycle + 1 : std::max(cycle + 1, next_event);
  }

  bool all_ffma = !warps.empty();
  for (const auto& w : warps)
    for (const auto& in : w.program.instructions) all_ffma = all_ffma && in.opcode == "FFMA";

  std::vector<std::int64_t> busy(static_cast<std::size_t>(nsched), 0);
  for (std::size_t w = 0; w < runs.size(); ++w) {
    const auto t = runs[w].finish();
    const auto s = static_cast<std::size_t>(scheduler_of(warps[w].warp_id, nsched));
    busy[s] = std::max(busy[s], t.total_cycles);
    res.total_cycles = std::max(res.total_cycles, t.total_cycles);
    res.total_instructions += static_cast<std::int64_t>(t.entries.size());
  }
  for (std::size_t s = 0; s < members.size(); ++s) {
    if (members[s].empty()) continue;
    SchedulerStats st;
    st.scheduler = static_cast<int>(s);
    for (auto w : members[s]) st.warps.push_back(warps[w].warp_id);
    st.instructions = issued[s];
    st.busy_until = busy[s];
    st.ipc = busy[s] ? static_cast<double>(issued[s]) / static_cast<double>(busy[s]) : 0.0;
    res.schedulers.push_back(std::move(st));
  }
  if (res.total_cycles > 0)
    res.aggregate_ipc =
        static_cast<double>(res.total_instructions) / static_cast<double>(res.total_cycles);
  if (all_ffma && res.total_instructions > 0)
    res.gflops = res.aggregate_ipc * 64 * 2 * profile.graphics_clock_mhz / 1000.0;
  return res;
}

int minimal_correct_stall(std::string_view producer_opcode, const GpuArchProfile& profile,
                          const ScheduleOptions& options) {
  auto opt = options;
  opt.model_conflicts = false;
  const auto producer =
      parse_instruction(std::string(producer_opcode) + " R2, R4, R6, R8 ;");
  const auto consumer = parse_instruction("FADD R20, R2, R22 ;");
  const auto nop = parse_instruction("NOP ;");
  const int limit = 4096;
  for (int s = 1; s <= limit; ++s) {
    Program p;
    p.arch = profile.generation;
    std::vector<ControlInfo> ctl;
    ControlInfo a;
    a.stall = static_cast<std::uint8_t>(std::min(s, kMaxStall));
    p.instructions.push_back(producer);
    ctl.push_back(a);
    for (int left = s - kMaxStall; left > 0; left -= kMaxStall) {
      ControlInfo n;
      n.stall = static_cast<std::uint8_t>(std::min(left, kMaxStall));
      p.instructions.push_back(nop);
      ctl.push_back(n);
    }
    p.instructions.push_back(consumer);
    ctl.push_back(ControlInfo{});
    p.controls = std::move(ctl);
    const auto t = schedule_warp(p, profile, opt);
    if (t.hazards.empty()) return s;
  }
  throw Error(ErrorCode::UnresolvedLatency,
              std::string(producer_opcode) + " needs more than " + std::to_string(limit) +
                  " stall cycles");
}

}  // namespace sasskit
