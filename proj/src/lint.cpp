#include "sasskit/lint.hpp"

#include <algorithm>
#include <set>

#include "sasskit/banks.hpp"
#include "sasskit/error.hpp"
#include "sasskit/issue.hpp"

namespace sasskit {

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::Info: return "info";
    case Severity::Warn: return "warn";
    case Severity::Perf: return "perf";
  }
  return "info";
}

const std::vector<LintRule>& lint_rules() {
  using G = Generation;
  static const std::vector<LintRule> rules = {
      {"narrow-global-access", 'a', Severity::Perf,
       {G::Kepler, G::Maxwell, G::Pascal, G::Volta, G::Turing},
       "global loads/stores narrower than 128 bits in loops or repeated"},
      {"bank-conflict", 'b', Severity::Perf,
       {G::Kepler, G::Maxwell, G::Pascal, G::Volta, G::Turing},
       "source registers exceed a register bank's read ports"},
      {"reuse-opportunity", 'c', Severity::Info,
       {G::Maxwell, G::Pascal, G::Volta, G::Turing},
       "register read again in the same slot without a reuse flag"},
      {"control-anomaly", 'd', Severity::Warn,
       {G::Maxwell, G::Pascal, G::Volta, G::Turing},
       "waits on unset barriers or stalls shorter than a producer's latency"},
  };
  return rules;
}

std::vector<std::string> resolve_rules(std::string_view selection) {
  std::vector<std::string> out;
  if (selection.empty()) {
    for (const auto& r : lint_rules()) out.push_back(r.id);
    return out;
  }
  std::size_t start = 0;
  while (start <= selection.size()) {
    auto end = selection.find(',', start);
    if (end == std::string_view::npos) end = selection.size();
    const auto tok = selection.substr(start, end - start);
    start = end + 1;
    if (tok.empty()) continue;
    const LintRule* hit = nullptr;
    for (const auto& r : lint_rules())
      if (r.id == tok || (tok.size() == 1 && tok[0] == r.letter)) hit = &r;
    if (!hit) throw Error(ErrorCode::UnknownRuleId, "unknown lint rule '" + std::string(tok) + "'");
    if (std::find(out.begin(), out.end(), hit->id) == out.end()) out.push_back(hit->id);
  }
  return out;
}

namespace {

bool global_access(const Instruction& in) { return in.opcode == "LDG" || in.opcode == "STG"; }

std::optional<std::int64_t> branch_target(const Instruction& in) {
  if (in.opcode != "BRA" && in.opcode != "JMP") return std::nullopt;
  for (const auto& op : in.operands)
    if (const auto* imm = std::get_if<Immediate>(&op.value); imm && !imm->is_float)
      return imm->integer;
  return std::nullopt;
}

std::string memref_text(const Instruction& in) {
  for (const auto& op : in.operands)
    if (std::holds_alternative<MemRef>(op.value)) return render_operand(op);
  return {};
}

std::string widen(const Instruction& in) {
  Instruction w = in;
  w.address.reset();
  w.predicate = in.predicate;
  w.raw_words.clear();
  w.leading_words.clear();
  auto it = std::find_if(w.modifiers.begin(), w.modifiers.end(), [](const std::string& m) {
    return m == "64" || m == "32" || m == "U8" || m == "S8" || m == "U16" || m == "S16";
  });
  if (it != w.modifiers.end()) {
    *it = "128";
  } else {
    auto pos = std::find(w.modifiers.begin(), w.modifiers.end(), "E");
    w.modifiers.insert(pos == w.modifiers.end() ? w.modifiers.begin() : pos + 1, "128");
  }
  return render_instruction(w);
}

void narrow_global(const Program& p, std::vector<Finding>& out) {
  const auto& ins = p.instructions;
  std::map<std::string, std::set<std::string>> addresses;
  for (const auto& in : ins)
    if (global_access(in)) addresses[in.opcode].insert(memref_text(in));
  for (std::size_t i = 0; i < ins.size(); ++i) {
    const auto& in = ins[i];
    if (!global_access(in)) continue;
    const int width = access_width(in);
    if (width >= 128) continue;
    bool in_loop = false;
    if (in.address)
      for (std::size_t j = i; j < ins.size() && !in_loop; ++j)
        if (auto t = branch_target(ins[j]); t && ins[j].address &&
                                            static_cast<std::uint64_t>(*t) <= *in.address &&
                                            *t < static_cast<std::int64_t>(*ins[j].address))
          in_loop = true;
    const bool repeated = addresses[in.opcode].size() >= 2;
    if (!in_loop && !repeated) continue;
    Finding f;
    f.rule = "narrow-global-access";
    f.severity = Severity::Perf;
    f.index = i;
    f.address = in.address;
    f.message = std::to_string(width) + "-bit " + in.opcode + " " +
                (in_loop ? "inside a loop" : "repeated at several addresses") +
                "; 128-bit vector accesses move more data per instruction";
    f.suggestion = widen(in);
    out.push_back(std::move(f));
  }
}

void bank_conflicts(const Program& p, const GpuArchProfile& profile, std::vector<Finding>& out) {
  bool reuse = p.controls.has_value();
  for (const auto& in : p.instructions)
    for (const auto& op : in.operands) reuse = reuse || op.has_attribute("reuse");
  const auto rep = analyze_conflicts(p, profile, reuse);
  for (const auto& ic : rep.instructions) {
    if (ic.conflict_cycles == 0) continue;
    std::string banks;
    for (std::size_t b = 0; b < ic.port_demand.size(); ++b)
      if (ic.port_demand[b] > profile.bank_ports)
        banks += (banks.empty() ? "" : ", ") + std::string("bank ") + std::to_string(b) + " x" +
                 std::to_string(ic.port_demand[b]);
    Finding f;
    f.rule = "bank-conflict";
    f.severity = Severity::Perf;
    f.index = ic.index;
    f.address = ic.address;
    f.message = std::to_string(ic.conflict_cycles) + " conflict cycle(s): " + banks;
    f.suggestion = "run 'sasskit reassign' to move a source register to another bank";
    out.push_back(std::move(f));
  }
}

bool reuse_flagged(const Program& p, std::size_t i, int slot, std::size_t operand) {
  if (p.controls) return (*p.controls)[i].reuses(slot);
  return p.instructions[i].operands[operand].has_attribute("reuse");
}

void reuse_opportunities(const Program& p, std::vector<Finding>& out) {
  const auto& ins = p.instructions;
  for (std::size_t i = 0; i + 1 < ins.size(); ++i) {
    if (p.controls && !(*p.controls)[i].yield) continue;
    const auto a = source_registers(ins[i]);
    const auto b = source_registers(ins[i + 1]);
    const auto dsts = destination_registers(ins[i]);
    for (const auto& ua : a) {
      if (ua.from_memref || ua.slot >= 4) continue;
      const bool overwritten = std::any_of(dsts.begin(), dsts.end(), [&](const RegisterUse& d) {
        return ua.base >= d.base && ua.base < d.base + d.count;
      });
      if (overwritten) continue;
      const bool again = std::any_of(b.begin(), b.end(), [&](const RegisterUse& ub) {
        return !ub.from_memref && ub.slot == ua.slot && ub.base == ua.base;
      });
      if (!again || reuse_flagged(p, i, ua.slot, static_cast<std::size_t>(ua.operand_index)))
        continue;
      Finding f;
      f.rule = "reuse-opportunity";
      f.severity = Severity::Info;
      f.index = i;
      f.address = ins[i].address;
      f.message = "R" + std::to_string(ua.base) + " is read again in slot " +
                  std::to_string(ua.slot) + " by the next instruction without a reuse flag";
      f.suggestion = "set the reuse flag on R" + std::to_string(ua.base);
      out.push_back(std::move(f));
    }
  }
}

void control_anomalies(const Program& p, const GpuArchProfile& profile,
                       std::vector<Finding>& out) {
  if (!p.controls) return;
  const auto& ins = p.instructions;
  const auto& ctl = *p.controls;
  std::set<int> ever_set;
  for (const auto& c : ctl) {
    if (c.has_read_barrier()) ever_set.insert(c.read_barrier);
    if (c.has_write_barrier()) ever_set.insert(c.write_barrier);
  }
  for (std::size_t i = 0; i < ins.size(); ++i) {
    for (int b = 0; b < kNumBarriers; ++b)
      if (ctl[i].waits_on(b) && !ever_set.contains(b)) {
        Finding f;
        f.rule = "control-anomaly";
        f.severity = Severity::Warn;
        f.index = i;
        f.address = ins[i].address;
        f.message = "waits on barrier " + std::to_string(b) + ", which no instruction sets";
        out.push_back(std::move(f));
      }
    const auto [cls, lat] = resolve_latency(ins[i], profile);
    if (lat.variable) continue;
    const auto dsts = destination_registers(ins[i]);
    if (dsts.empty()) continue;
    const bool guarded = ctl[i].has_write_barrier();
    int elapsed = 0;
    for (std::size_t j = i + 1; j < ins.size(); ++j) {
      const auto& c = ctl[j - 1];
      elapsed += std::max<int>(c.stall, 1) + (c.yield ? 0 : 1);
      if (elapsed >= lat.cycles) break;
      if (guarded && ctl[j].waits_on(ctl[i].write_barrier)) break;
      const auto srcs = source_registers(ins[j]);
      const bool reads = std::any_of(srcs.begin(), srcs.end(), [&](const RegisterUse& s) {
        return std::any_of(dsts.begin(), dsts.end(), [&](const RegisterUse& d) {
          return s.base < d.base + d.count && d.base < s.base + s.count;
        });
      });
      if (!reads) continue;
      Finding f;
      f.rule = "control-anomaly";
      f.severity = Severity::Warn;
      f.index = i;
      f.address = ins[i].address;
      f.message = ins[i].opcode + " result (" + cls + ", " + std::to_string(lat.cycles) +
                  " cycles) is read " + std::to_string(elapsed) + " cycle(s) later";
      f.suggestion = "raise the stall count to " + std::to_string(std::min(lat.cycles, kMaxStall));
      out.push_back(std::move(f));
      break;
    }
  }
}

bool applies(const std::string& id, const Program& p, const GpuArchProfile& profile) {
  const auto g = p.arch.value_or(profile.generation);
  for (const auto& r : lint_rules())
    if (r.id == id)
      return std::find(r.applies_to.begin(), r.applies_to.end(), g) != r.applies_to.end();
  return false;
}

}  // namespace

ReportDocument lint(const Program& p, const GpuArchProfile& profile,
                    const std::vector<std::string>& rules) {
  std::string joined;
  for (const auto& r : rules) joined += (joined.empty() ? "" : ",") + r;
  const auto selected = resolve_rules(joined);
  std::vector<Finding> found;
  for (const auto& id : selected) {
    if (!applies(id, p, profile)) continue;
    if (id == "narrow-global-access") narrow_global(p, found);
    if (id == "bank-conflict") bank_conflicts(p, profile, found);
    if (id == "reuse-opportunity") reuse_opportunities(p, found);
    if (id == "control-anomaly") control_anomalies(p, profile, found);
  }
  const bool by_address = std::all_of(p.instructions.begin(), p.instructions.end(),
                                      [](const Instruction& in) { return in.address.has_value(); });
  auto rank = [](const std::string& id) {
    for (const auto& r : lint_rules())
      if (r.id == id) return r.letter;
    return 'z';
  };
  std::stable_sort(found.begin(), found.end(), [&](const Finding& a, const Finding& b) {
    const auto ka = by_address ? *a.address : a.index;
    const auto kb = by_address ? *b.address : b.index;
    if (ka != kb) return ka < kb;
    return rank(a.rule) < rank(b.rule);
  });
  ReportDocument doc;
  for (const auto& id : selected) doc.summary[id] = 0;
  for (const auto& f : found) ++doc.summary[f.rule];
  doc.findings = std::move(found);
  return doc;
}

}  // namespace sasskit
