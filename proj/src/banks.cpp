#include "sasskit/banks.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "sasskit/error.hpp"

namespace sasskit {

BankModel BankModel::of(const GpuArchProfile& p) {
  return BankModel{p.register_banks, p.bank_width_bits, p.bank_ports, p.conflict_penalty};
}

int register_bank(int reg, const GpuArchProfile& profile) {
  if (reg == kRZ) throw Error(ErrorCode::NotBankable, "RZ has no bank");
  if (reg < 0 || reg > 254)
    throw Error(ErrorCode::NotBankable, "R" + std::to_string(reg) + " is not a register");
  return BankModel::of(profile).bank_of(reg);
}

int register_bank(const OperandValue& v, const GpuArchProfile& profile) {
  if (const auto* r = std::get_if<GeneralReg>(&v)) return register_bank(r->index, profile);
  if (std::holds_alternative<UniformReg>(v))
    throw Error(ErrorCode::NotBankable, "uniform registers are not banked");
  throw Error(ErrorCode::NotBankable, "operand is not a general register");
}

bool ReuseCacheState::contains(int slot, int reg) const {
  if (slot < 0 || slot >= kSlots) return false;
  const auto& s = slots_[slot];
  return std::find(s.begin(), s.end(), reg) != s.end();
}

void ReuseCacheState::save(int slot, int reg) {
  if (slot < 0 || slot >= kSlots || contains(slot, reg)) return;
  slots_[slot][next_[slot]] = reg;
  next_[slot] = (next_[slot] + 1) % kEntries;
}

void ReuseCacheState::invalidate(int reg) {
  for (auto& s : slots_)
    for (auto& e : s)
      if (e == reg) e = -1;
}

void ReuseCacheState::clear() {
  for (auto& s : slots_) s.fill(-1);
  next_.fill(0);
}

namespace {

int demand_cycles(const std::vector<int>& demand, const BankModel& m) {
  int c = 0;
  for (int d : demand) c += std::max(0, d - m.ports) * m.penalty;
  return c;
}

std::vector<SourceRead> reads_of(const Instruction& in, const BankModel& m) {
  std::vector<SourceRead> out;
  for (const auto& u : source_registers(in)) {
    // An address register pair goes through the LSU path as one access.
    const int n = u.from_memref ? 1 : u.count;
    for (int k = 0; k < n; ++k)
      out.push_back({u.slot, u.base + k, m.bank_of(u.base + k), false});
  }
  return out;
}

bool has_reuse_info(const Program& p) {
  if (p.controls) return true;
  for (const auto& in : p.instructions)
    for (const auto& op : in.operands)
      if (op.has_attribute("reuse")) return true;
  return false;
}

}  // namespace

int instruction_conflict_cycles(const Instruction& in, const BankModel& m) {
  std::vector<int> demand(static_cast<std::size_t>(m.banks), 0);
  for (const auto& r : reads_of(in, m)) ++demand[static_cast<std::size_t>(r.bank)];
  return demand_cycles(demand, m);
}

ConflictReport analyze_conflicts(const Program& program, const GpuArchProfile& profile,
                                 bool model_reuse) {
  if (program.controls && program.controls->size() != program.instructions.size())
    throw Error(ErrorCode::MalformedControls, "controls do not match instruction count");
  if (model_reuse && !program.instructions.empty() && !has_reuse_info(program))
    throw Error(ErrorCode::MissingControls,
                "reuse modeling needs control words or .reuse operand flags");
  const auto m = BankModel::of(profile);
  ConflictReport rep;
  ReuseCacheState cache;
  bool reuse_void = false;

  for (std::size_t i = 0; i < program.instructions.size(); ++i) {
    const auto& in = program.instructions[i];
    InstructionConflicts ic;
    ic.index = i;
    ic.address = in.address;
    ic.reads = reads_of(in, m);
    ic.port_demand.assign(static_cast<std::size_t>(m.banks), 0);
    for (auto& r : ic.reads) {
      if (model_reuse && !reuse_void && cache.contains(r.slot, r.reg)) {
        r.reuse_hit = true;
        ++ic.reuse_hits;
      } else {
        ++ic.port_demand[static_cast<std::size_t>(r.bank)];
      }
    }
    ic.conflict_cycles = demand_cycles(ic.port_demand, m);

    if (model_reuse) {
      const std::uint8_t flags = [&]() -> std::uint8_t {
        if (program.controls) return (*program.controls)[i].reuse;
        std::uint8_t f = 0;
        for (const auto& u : source_registers(in))
          if (u.slot < ReuseCacheState::kSlots &&
              in.operands[static_cast<std::size_t>(u.operand_index)].has_attribute("reuse"))
            f |= static_cast<std::uint8_t>(1u << u.slot);
        return f;
      }();
      if (reuse_void) cache.clear();
      for (const auto& r : ic.reads)
        if (!reuse_void && ((flags >> r.slot) & 1u) && r.slot < ReuseCacheState::kSlots)
          cache.save(r.slot, r.reg);
      for (const auto& d : destination_registers(in))
        for (int k = 0; k < d.count; ++k) cache.invalidate(d.base + k);
      const bool yield = program.controls ? (*program.controls)[i].yield : true;
      reuse_void = !yield;
    }

    rep.total_conflict_cycles += ic.conflict_cycles;
    rep.total_reuse_hits += ic.reuse_hits;
    if (ic.conflict_cycles > 0) ++rep.conflicting_instructions;
    rep.instructions.push_back(std::move(ic));
  }
  return rep;
}

Program rename_registers(const Program& program, const std::map<int, int>& renaming) {
  Program out = program;
  auto map = [&](int r) {
    auto it = renaming.find(r);
    return it == renaming.end() ? r : it->second;
  };
  for (auto& in : out.instructions)
    for (auto& op : in.operands) {
      if (auto* r = std::get_if<GeneralReg>(&op.value); r && !r->is_zero())
        r->index = map(r->index);
      else if (auto* mref = std::get_if<MemRef>(&op.value); mref && !mref->base.is_zero())
        mref->base.index = map(mref->base.index);
    }
  return out;
}

namespace {

// An aligned run of registers that must move together.
struct Unit {
  int base = 0;
  int size = 1;
  int align = 1;
};

struct Access {
  int unit = 0;
  int offset = 0;
};

class Search {
 public:
  Search(const Program& p, const BankModel& m, const ReassignOptions& opt)
      : model_(m), opt_(opt) {
    build_units(p);
    for (const auto& in : p.instructions) {
      std::vector<Access> acc;
      for (const auto& r : reads_of(in, m)) acc.push_back(locate(r.reg));
      accesses_.push_back(std::move(acc));
    }
  }

  std::size_t unit_count() const { return units_.size(); }
  const std::vector<Unit>& units() const { return units_; }

  int cost(const std::vector<int>& residue) const {
    int total = 0;
    std::vector<int> demand(static_cast<std::size_t>(model_.banks));
    for (const auto& acc : accesses_) {
      std::fill(demand.begin(), demand.end(), 0);
      for (const auto& a : acc)
        ++demand[static_cast<std::size_t>((residue[static_cast<std::size_t>(a.unit)] +
                                           a.offset) % model_.banks)];
      total += demand_cycles(demand, model_);
    }
    return total;
  }

  std::vector<int> identity() const {
    std::vector<int> r;
    for (const auto& u : units_) r.push_back(u.base % model_.banks);
    return r;
  }

  std::vector<int> choices(std::size_t u) const {
    const auto& unit = units_[u];
    const int g = std::gcd(unit.align, model_.banks);
    std::vector<int> out;
    for (int r = 0; r < model_.banks; ++r)
      if (r % g == unit.base % g) out.push_back(r);
    return out;
  }

  std::optional<std::map<int, int>> realize(const std::vector<int>& residue) const {
    std::vector<bool> used(static_cast<std::size_t>(opt_.budget), false);
    std::vector<int> placed(units_.size(), -1);
    auto fits = [&](int b, int size) {
      if (b < 0 || b + size > opt_.budget) return false;
      for (int k = 0; k < size; ++k)
        if (used[static_cast<std::size_t>(b + k)]) return false;
      return true;
    };
    auto take = [&](std::size_t u, int b) {
      placed[u] = b;
      for (int k = 0; k < units_[u].size; ++k) used[static_cast<std::size_t>(b + k)] = true;
    };
    for (std::size_t u = 0; u < units_.size(); ++u)
      if (units_[u].base % model_.banks == residue[u] && fits(units_[u].base, units_[u].size))
        take(u, units_[u].base);
    std::vector<std::size_t> order(units_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(units_[b].align, units_[b].size) < std::tie(units_[a].align, units_[a].size);
    });
    for (auto u : order) {
      if (placed[u] >= 0) continue;
      const auto& unit = units_[u];
      bool ok = false;
      for (int b = unit.base % unit.align; b + unit.size <= opt_.budget; b += unit.align) {
        if (b % model_.banks == residue[u] && fits(b, unit.size)) {
          take(u, b);
          ok = true;
          break;
        }
      }
      if (!ok) return std::nullopt;
    }
    std::map<int, int> ren;
    for (std::size_t u = 0; u < units_.size(); ++u)
      if (placed[u] != units_[u].base)
        for (int k = 0; k < units_[u].size; ++k) ren[units_[u].base + k] = placed[u] + k;
    return ren;
  }

 private:
  void build_units(const Program& p) {
    struct Range {
      int lo, hi, align;
    };
    std::vector<Range> ranges;
    auto add = [&](const RegisterUse& u) {
      ranges.push_back({u.base, std::min(u.base + u.count, 255), u.count});
    };
    for (const auto& in : p.instructions) {
      for (const auto& u : destination_registers(in)) add(u);
      for (const auto& u : source_registers(in)) add(u);
    }
    std::sort(ranges.begin(), ranges.end(),
              [](const Range& a, const Range& b) { return a.lo < b.lo; });
    for (const auto& r : ranges) {
      if (!units_.empty() && r.lo < units_.back().base + units_.back().size) {
        auto& u = units_.back();
        u.size = std::max(u.size, r.hi - u.base);
        u.align = std::max(u.align, r.align);
      } else {
        units_.push_back({r.lo, r.hi - r.lo, r.align});
      }
    }
  }

  Access locate(int reg) const {
    for (std::size_t u = 0; u < units_.size(); ++u)
      if (reg >= units_[u].base && reg < units_[u].base + units_[u].size)
        return {static_cast<int>(u), reg - units_[u].base};
    return {0, 0};
  }

  BankModel model_;
  ReassignOptions opt_;
  std::vector<Unit> units_;
  std::vector<std::vector<Access>> accesses_;
};

int changes(const std::vector<int>& a, const std::vector<int>& b) {
  int n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
  return n;
}

}  // namespace

ReassignResult reassign_registers(const Program& program, const GpuArchProfile& profile,
                                  const ReassignOptions& opt) {
  for (const auto& in : program.instructions)
    if (in.opcode == "CALL" || in.opcode == "RET" || in.opcode == "BRX" || in.opcode == "JMX")
      throw Error(ErrorCode::UnsupportedControlFlow,
                  in.opcode + " makes register lifetimes unknowable");
  const auto m = BankModel::of(profile);
  Search search(program, m, opt);
  int width = 0;
  for (const auto& u : search.units()) width += u.size;
  if (width > opt.budget)
    throw Error(ErrorCode::InfeasibleBudget,
                std::to_string(width) + " registers needed, budget is " +
                    std::to_string(opt.budget));

  ReassignResult res;
  res.before = analyze_conflicts(program, profile);
  const auto start = search.identity();
  const int base_cost = search.cost(start);
  std::map<int, int> best_map;

  if (base_cost > 0 && search.unit_count() > 0) {
    struct Candidate {
      int cost;
      int changed;
      std::vector<int> residue;
    };
    std::vector<Candidate> cands;
    const auto n = search.unit_count();
    if (n <= static_cast<std::size_t>(opt.exhaustive_limit)) {
      std::vector<std::vector<int>> choice(n);
      for (std::size_t u = 0; u < n; ++u) choice[u] = search.choices(u);
      std::vector<std::size_t> idx(n, 0);
      std::vector<int> cur(n);
      for (;;) {
        for (std::size_t u = 0; u < n; ++u) cur[u] = choice[u][idx[u]];
        const int c = search.cost(cur);
        if (c < base_cost) cands.push_back({c, changes(cur, start), cur});
        std::size_t k = 0;
        while (k < n && ++idx[k] == choice[k].size()) idx[k++] = 0;
        if (k == n) break;
      }
    } else {
      std::mt19937 rng(opt.seed);
      for (int attempt = 0; attempt <= opt.restarts; ++attempt) {
        auto cur = start;
        if (attempt > 0)
          for (std::size_t u = 0; u < n; ++u) {
            const auto ch = search.choices(u);
            cur[u] = ch[rng() % ch.size()];
          }
        int c = search.cost(cur);
        for (bool improved = true; improved;) {
          improved = false;
          for (std::size_t u = 0; u < n; ++u)
            for (int r : search.choices(u)) {
              if (r == cur[u]) continue;
              const int old = cur[u];
              cur[u] = r;
              const int nc = search.cost(cur);
              if (nc < c) {
                c = nc;
                improved = true;
              } else {
                cur[u] = old;
              }
            }
        }
        if (c < base_cost) cands.push_back({c, changes(cur, start), cur});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(a.cost, a.changed) < std::tie(b.cost, b.changed);
    });
    const std::size_t limit = std::min<std::size_t>(cands.size(), 256);
    for (std::size_t i = 0; i < limit; ++i)
      if (auto ren = search.realize(cands[i].residue)) {
        best_map = std::move(*ren);
        break;
      }
  }

  res.renaming = best_map;
  res.program = rename_registers(program, best_map);
  res.after = analyze_conflicts(res.program, profile);
  if (res.after.total_conflict_cycles > res.before.total_conflict_cycles) {
    res.renaming.clear();
    res.program = program;
    res.after = res.before;
  }
  return res;
}

}  // namespace sasskit
