// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the exit status is nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "sasskit/banks.hpp"
#include "sasskit/cli.hpp"
#include "sasskit/control.hpp"
#include "sasskit/error.hpp"
#include "sasskit/issue.hpp"
#include "sasskit/lint.hpp"
#include "sasskit/memhier.hpp"
#include "sasskit/profile.hpp"
#include "sasskit/sass.hpp"

using namespace sasskit;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

// ---- independent oracles -----------------------------------------------------

std::uint32_t slice(std::uint64_t word, int lo, int width) {
  return static_cast<std::uint32_t>((word >> lo) & ((1ull << width) - 1));
}

// Source registers of a plain ALU instruction: every numbered R operand
// after the destination.
std::vector<int> alu_sources(const std::string& line) {
  std::vector<int> regs;
  const auto body = line.substr(line.find(' ') + 1);
  std::stringstream ss(body);
  std::string tok;
  bool first = true;
  while (std::getline(ss, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(' '));
    tok.erase(tok.find_last_not_of(" ;") + 1);
    if (first) {
      first = false;
      continue;
    }
    if (tok.size() > 1 && tok[0] == 'R' && tok != "RZ") regs.push_back(std::stoi(tok.substr(1)));
  }
  return regs;
}

int naive_port_cycles(const std::vector<int>& regs, int banks, int ports, int penalty) {
  std::vector<int> per_bank(static_cast<std::size_t>(banks), 0);
  for (int r : regs) ++per_bank[static_cast<std::size_t>(r % banks)];
  int cycles = 0;
  for (int n : per_bank) cycles += std::max(0, n - ports) * penalty;
  return cycles;
}

struct RandomAluProgram {
  std::string text;
  std::vector<std::vector<int>> sources;
  std::set<int> registers;
};

RandomAluProgram random_alu_program(std::mt19937& rng, int length, int pool) {
  static const char* ops[] = {"FFMA", "IADD3", "FMUL", "FADD"};
  std::vector<int> regs(static_cast<std::size_t>(pool));
  std::uniform_int_distribution<int> any(0, 200);
  for (auto& r : regs) r = any(rng);
  std::uniform_int_distribution<std::size_t> pick(0, regs.size() - 1);
  RandomAluProgram out;
  for (int i = 0; i < length; ++i) {
    const std::string op = ops[rng() % 4];
    const int nsrc = op == "FFMA" || op == "IADD3" ? 3 : 2;
    const int dst = regs[pick(rng)];
    std::string line = op + " R" + std::to_string(dst);
    out.registers.insert(dst);
    for (int s = 0; s < nsrc; ++s) {
      const int r = regs[pick(rng)];
      line += ", R" + std::to_string(r);
    }
    line += " ;";
    out.sources.push_back(alu_sources(line));
    for (int r : out.sources.back()) out.registers.insert(r);
    out.text += line + "\n";
  }
  return out;
}

// Minimum total conflict cycles over every bank residue assignment.
int exhaustive_min_conflicts(const RandomAluProgram& p, const BankModel& m) {
  const std::vector<int> regs(p.registers.begin(), p.registers.end());
  std::map<int, std::size_t> slot;
  for (std::size_t i = 0; i < regs.size(); ++i) slot[regs[i]] = i;
  std::vector<int> residue(regs.size(), 0);
  int best = INT32_MAX;
  for (;;) {
    int total = 0;
    for (const auto& srcs : p.sources) {
      std::vector<int> mapped;
      for (int r : srcs) mapped.push_back(residue[slot[r]]);
      total += naive_port_cycles(mapped, m.banks, m.ports, m.penalty);
    }
    best = std::min(best, total);
    std::size_t k = 0;
    while (k < residue.size() && ++residue[k] == m.banks) residue[k++] = 0;
    if (k == residue.size()) break;
  }
  return best;
}

int total_naive(const RandomAluProgram& p, const BankModel& m) {
  int t = 0;
  for (const auto& s : p.sources) t += naive_port_cycles(s, m.banks, m.ports, m.penalty);
  return t;
}

Program parse_for(const std::string& text, Generation g) {
  ParseOptions opt;
  opt.arch = g;
  auto p = parse_listing(text, opt);
  p.controls = std::vector<ControlInfo>(p.instructions.size());
  return p;
}

// ---- criteria ----------------------------------------------------------------

Outcome control_bijection() {
  Outcome o;
  const auto t0 = Clock::now();
  std::uint32_t mismatches = 0;
  for (std::uint32_t v = 0; v <= kSectionMask; ++v) {
    const auto c = decode_control_section(v);
    if (encode_control_section(c) != v) ++mismatches;
    if (c.stall != slice(v, 0, 4) || c.yield != static_cast<bool>(slice(v, 4, 1)) ||
        c.write_barrier != slice(v, 5, 3) || c.read_barrier != slice(v, 8, 3) ||
        c.wait_mask != slice(v, 11, 6) || c.reuse != slice(v, 17, 4))
      ++mismatches;
  }
  const double t = seconds_since(t0);
  o.expect(mismatches == 0, std::to_string(mismatches) + " mismatching sections");
  o.expect(t < 10.0, "took " + std::to_string(t) + " s");
  o.detail = o.ok ? "2^21 sections in " + std::to_string(t).substr(0, 5) + " s" : o.detail;
  return o;
}

Outcome pascal_bundle() {
  Outcome o;
  ParseOptions opt;
  opt.arch = Generation::Pascal;
  const auto prog = parse_listing(fixture("pascal_bundle.sass"), opt);
  const auto words = prog.words();
  o.expect(words.size() == 4 && words[0] == 0x000f8800fe2007f1, "fixture words");
  if (!o.ok) return o;
  const auto layout = default_layout(Generation::Pascal);
  const auto secs = extract_controls(words, layout);
  o.expect(secs.size() == 3, "section count");
  for (std::size_t k = 0; k < secs.size() && o.ok; ++k)
    o.expect(secs[k].raw == slice(words[0], static_cast<int>(21 * k), 21),
             "section " + std::to_string(k));
  auto stripped = words;
  stripped[0] = 0;
  o.expect(inject_controls(stripped, secs, layout) == words, "inject is not the inverse");
  o.expect(inject_controls(words, extract_controls(words, layout), layout) == words,
           "re-inject changed bits");
  if (o.ok) o.detail = "0x7f1 0x7f1 0x3e2";
  return o;
}

Outcome bank_oracle() {
  Outcome o;
  const auto t4 = builtin_profile("T4");
  const auto tm = BankModel::of(t4);
  auto cyc = [&](const std::string& s) {
    return instruction_conflict_cycles(parse_instruction(s), tm);
  };
  o.expect(cyc("FFMA R15, R11, R12, R13 ;") == 0, "R11,R12,R13");
  o.expect(cyc("FFMA R18, R10, R12, R16 ;") > 0, "R10,R12,R16");
  for (int x = 0; x <= 254; ++x) {
    const auto rx = "R" + std::to_string(x);
    o.expect((cyc("FFMA R6, R97, R99, " + rx + " ;") > 0) == (x % 2 == 1), "R97,R99," + rx);
    o.expect(cyc("FFMA R6, R98, R99, " + rx + " ;") == 0, "R98,R99," + rx);
  }
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> reg(0, 254);
  int checked = 0;
  for (const char* name : {"K80", "M60", "P100", "V100", "T4"}) {
    const auto profile = builtin_profile(name);
    const auto m = BankModel::of(profile);
    for (int i = 0; i < 1000; ++i) {
      std::string line = (i % 2 ? "FFMA R" : "IADD3 R") + std::to_string(reg(rng));
      for (int s = 0; s < 3; ++s) {
        const int r = reg(rng);
        line += r == 254 ? std::string(", RZ") : ", R" + std::to_string(r);
      }
      line += " ;";
      const auto p = parse_for(line + "\n", profile.generation);
      const int got = analyze_conflicts(p, profile).total_conflict_cycles;
      const int want = naive_port_cycles(alu_sources(line), m.banks, m.ports, m.penalty);
      o.expect(got == want, std::string(name) + ": " + line);
      ++checked;
    }
  }
  if (o.ok) o.detail = "4 worked cases, " + std::to_string(checked) + " random instructions";
  return o;
}

Outcome reassignment() {
  Outcome o;
  const auto t4 = builtin_profile("T4");
  const auto loop = parse_for(
      "/*0000*/ FFMA R6, R97, R99, R1 ;\n"
      "/*0010*/ FFMA R7, R97, R99, R3 ;\n"
      "/*0020*/ FFMA R8, R97, R99, R5 ;\n"
      "/*0030*/ IADD3 R1, R1, R6, RZ ;\n"
      "/*0040*/ BRA 0x0 ;\n",
      Generation::Turing);
  const auto r = reassign_registers(loop, t4);
  o.expect(r.before.total_conflict_cycles > 0, "fixture has no conflicts");
  o.expect(analyze_conflicts(r.program, t4).total_conflict_cycles == 0, "loop not cleared");

  std::mt19937 rng(77);
  int exact = 0;
  for (int i = 0; i < 100 && o.ok; ++i) {
    const auto& profile = i % 2 ? t4 : builtin_profile("P100");
    const auto m = BankModel::of(profile);
    const int pool = i < 60 ? 2 + static_cast<int>(rng() % 5) : 8 + static_cast<int>(rng() % 12);
    const auto rp = random_alu_program(rng, 20, pool);
    const auto p = parse_for(rp.text, profile.generation);
    const auto res = reassign_registers(p, profile);
    const int before = total_naive(rp, m);
    const int after = analyze_conflicts(res.program, profile).total_conflict_cycles;
    o.expect(res.before.total_conflict_cycles == before, "before mismatch in program " +
                                                             std::to_string(i));
    o.expect(after <= before, "conflicts increased in program " + std::to_string(i));
    if (rp.registers.size() <= 8) {
      o.expect(after == exhaustive_min_conflicts(rp, m),
               "not optimal in program " + std::to_string(i));
      ++exact;
    }
  }
  if (o.ok)
    o.detail = "loop cleared, 100 programs, " + std::to_string(exact) + " against exhaustive";
  return o;
}

Outcome scheduler_mapping() {
  Outcome o;
  for (int a = 0; a < 4; ++a)
    for (int b = 4; b < 8; ++b)
      o.expect((scheduler_of(a) == scheduler_of(b)) == (b == a + 4),
               "pair " + std::to_string(a) + "," + std::to_string(b));
  const auto t4 = builtin_profile("T4");
  std::mt19937 rng(5);
  for (int i = 0; i < 50 && o.ok; ++i) {
    auto make = [&] {
      auto rp = random_alu_program(rng, 24, 12);
      auto p = parse_for(rp.text, Generation::Turing);
      for (auto& c : *p.controls) {
        c.stall = static_cast<std::uint8_t>(1 + rng() % 6);
        c.yield = rng() % 4 != 0;
      }
      return p;
    };
    const auto a = make();
    const auto b = make();
    const auto same = simulate_multiwarp({{0, a}, {4, b}}, t4);
    const auto apart = simulate_multiwarp({{0, a}, {1, b}}, t4);
    o.expect(same.aggregate_ipc <= apart.aggregate_ipc + 1e-12, "pair " + std::to_string(i));
  }
  if (o.ok) o.detail = "diagonal collides, 50 random pairs";
  return o;
}

Outcome latency_table() {
  Outcome o;
  const auto t4 = builtin_profile("T4");
  struct Row {
    std::vector<const char*> ops;
    int cycles;
    bool approximate;
  };
  const std::vector<Row> rows = {
      {{"IADD3", "SHF", "LOP3", "SEL", "MOV", "FADD", "FFMA", "FMUL", "ISETP", "FSET", "FSETP"},
       4, false},
      {{"IMAD", "FMNMX"}, 5, false},
      {{"HADD2", "HMUL2", "HFMA2"}, 6, false},
      {{"POPC", "FLO", "BREV", "MUFU"}, 15, true},
      {{"DADD", "DMUL"}, 48, true},
      {{"DFMA", "DSET", "DSETP"}, 54, true},
  };
  std::string summary;
  for (const auto& row : rows)
    for (const char* op : row.ops) {
      const int got = minimal_correct_stall(op, t4);
      const bool ok = row.approximate ? std::abs(got - row.cycles) <= 0.1 * row.cycles
                                      : got == row.cycles;
      o.expect(ok, std::string(op) + " -> " + std::to_string(got));
      if (op == std::string("FFMA") || op == std::string("IMAD") || op == std::string("HADD2") ||
          op == std::string("DADD") || op == std::string("DFMA"))
        summary += std::string(summary.empty() ? "" : " ") + op + "=" + std::to_string(got);
    }
  if (o.ok) o.detail = summary;
  return o;
}

Outcome pchase_classes() {
  Outcome o;
  const auto t4 = builtin_profile("T4");
  constexpr std::uint64_t page = 2ull << 20;
  constexpr std::uint64_t stride = 4096;
  AccessTrace scan;
  for (int p = 0; p < 3; ++p)
    for (int s = 0; s < 2; ++s) {
      Access a;
      a.address = static_cast<std::uint64_t>(p) * page + static_cast<std::uint64_t>(s) * stride;
      scan.push_back(a);
    }
  using L = LatencyClass;
  // Cold: first touch of a page misses the TLB, the second access to the
  // page hits the TLB but misses L2. Re-scan: everything is in L1. After
  // dropping L1: everything is in L2.
  const std::vector<L> cold = {L::TLB_MISS, L::L2_MISS_TLB_HIT, L::TLB_MISS,
                               L::L2_MISS_TLB_HIT, L::TLB_MISS, L::L2_MISS_TLB_HIT};
  const std::map<L, int> cycles = {
      {L::TLB_MISS, 616}, {L::L1_HIT, 32}, {L::L2_HIT, 188}, {L::L2_MISS_TLB_HIT, 296}};
  HierarchyState st(t4);
  std::size_t idx = 0;
  auto check = [&](L want, const Access& a) {
    const auto e = st.load(idx++, a);
    o.expect(e.cls == want, "access " + std::to_string(idx - 1) + " is " +
                                std::string(to_string(e.cls)));
    o.expect(e.cycles == cycles.at(want), "cycles of " + std::string(to_string(want)));
  };
  for (std::size_t i = 0; i < scan.size(); ++i) check(cold[i], scan[i]);
  for (const auto& a : scan) check(L::L1_HIT, a);
  st.flush_l1();
  for (const auto& a : scan) check(L::L2_HIT, a);

  // The one-shot classifier must agree with the stateful walk.
  AccessTrace twice = scan;
  twice.insert(twice.end(), scan.begin(), scan.end());
  const auto e = classify_pchase(twice, t4);
  for (std::size_t i = 0; i < e.size(); ++i)
    o.expect(e[i].cls == (i < 6 ? cold[i] : L::L1_HIT), "classify_pchase " + std::to_string(i));
  if (o.ok) o.detail = "616/32/188/296, 18-access hand trace";
  return o;
}

Outcome plateaus() {
  Outcome o;
  const std::map<std::string, std::vector<std::uint64_t>> want = {
      {"T4", {16, 46, 4096}}, {"V100", {12, 128, 6144}}};
  std::string detail;
  for (const auto& [name, sizes] : want) {
    const auto profile = builtin_profile(name);
    const auto t0 = Clock::now();
    const auto got = detect_plateaus(icache_sweep(profile));
    const double t = seconds_since(t0);
    o.expect(t < 5.0, name + " took " + std::to_string(t) + " s");
    o.expect(got.size() == sizes.size(), name + ": " + std::to_string(got.size()) + " plateaus");
    for (std::size_t i = 0; i < got.size() && i < sizes.size(); ++i) {
      const std::uint64_t target = sizes[i] * 1024;
      const std::uint64_t step = target < 64 * 1024 ? 1024 : 64 * 1024;
      const auto diff = got[i] > target ? got[i] - target : target - got[i];
      o.expect(diff <= step, name + " plateau " + std::to_string(i) + " at " +
                                 std::to_string(got[i] / 1024) + " KiB");
    }
    detail += (detail.empty() ? "" : ", ") + name + " " + std::to_string(t).substr(0, 4) + " s";
  }
  if (o.ok) o.detail = detail;
  return o;
}

Outcome aggressor_victim() {
  Outcome o;
  const auto t4 = builtin_profile("T4");
  constexpr std::uint64_t K = 1024;
  struct Quadrant {
    Placement placement;
    std::uint64_t victim, aggressor;
    bool shared_level;
    const char* name;
  };
  const std::vector<Quadrant> qs = {
      {Placement::SameSmDifferentBlock, 4 * K, 4 * K, false, "same-SM L0"},
      {Placement::SameSmDifferentBlock, 24 * K, 48 * K, true, "same-SM L1"},
      {Placement::DifferentSm, 8 * K, 32 * K, false, "other-SM L1"},
      {Placement::DifferentSm, 64 * K, 8192 * K, true, "other-SM L2"},
  };
  for (const auto& q : qs) {
    AggressorVictimSpec spec;
    spec.placement = q.placement;
    spec.victim_bytes = q.victim;
    spec.aggressor_bytes = q.aggressor;
    const auto r = run_aggressor_victim(spec, t4);
    const bool victim_hurt = r.victim_cpi > r.victim_baseline_cpi * 1.05;
    const bool aggressor_hurt = r.aggressor_cpi > r.aggressor_baseline_cpi * 1.05;
    if (q.shared_level) {
      o.expect(victim_hurt && aggressor_hurt, std::string(q.name) + ": both should rise");
    } else {
      o.expect(std::abs(r.victim_cpi - r.victim_baseline_cpi) < 1e-9,
               std::string(q.name) + ": victim changed");
    }
  }
  if (o.ok) o.detail = "4 quadrants";
  return o;
}

Outcome bandwidth() {
  Outcome o;
  const std::map<std::string, double> want = {{"T4", 4070}, {"P4", 3919}, {"K80", 2912}};
  std::string detail;
  for (const auto& [name, gbps] : want) {
    const double got = shared_bandwidth_bound(builtin_profile(name)) / 1e9;
    o.expect(std::abs(got - gbps) <= 0.01 * gbps, name + " " + std::to_string(got));
    detail += (detail.empty() ? "" : " ") + name + "=" + std::to_string(std::lround(got));
  }
  if (o.ok) o.detail = detail + " GB/s";
  return o;
}

Outcome parser_corpus() {
  Outcome o;
  struct Item {
    const char* file;
    std::optional<Generation> arch;
    const char* opcode;
    int count;
  };
  const std::vector<Item> items = {
      {"saxpy_cublas.sass", std::nullopt, "LDG", 4},
      {"saxpy_improved.sass", std::nullopt, "FFMA", 4},
      {"pascal_bundle.sass", Generation::Pascal, "LDG", 2},
      {"volta_hmma884.sass", Generation::Volta, "HMMA", 16},
      {"turing_hmma1688.sass", Generation::Turing, "HMMA", 4},
  };
  for (const auto& it : items) {
    ParseOptions opt;
    opt.arch = it.arch;
    try {
      const auto p = parse_listing(fixture(it.file), opt);
      const auto n = std::count_if(p.instructions.begin(), p.instructions.end(),
                                   [&](const Instruction& i) { return i.opcode == it.opcode; });
      o.expect(n == it.count, std::string(it.file) + ": " + std::to_string(n) + " " + it.opcode);
      ParseOptions again;
      again.arch = p.arch;
      const auto text = render_program(p);
      const auto q = parse_listing(text, again);
      o.expect(q == p, std::string(it.file) + ": round trip");
      o.expect(render_program(q) == text, std::string(it.file) + ": render not stable");
    } catch (const Error& e) {
      o.expect(false, std::string(it.file) + ": " + e.what());
    }
  }
  if (o.ok) o.detail = "5 listings, HMMA 16 and 4";
  return o;
}

Outcome lint_counts() {
  Outcome o;
  const auto t4 = builtin_profile("T4");
  auto narrow = [&](const char* file) {
    const auto d = lint(parse_listing(fixture(file)), t4);
    return std::count_if(d.findings.begin(), d.findings.end(),
                         [](const Finding& f) { return f.rule == "narrow-global-access"; });
  };
  const auto bad = narrow("saxpy_cublas.sass");
  const auto good = narrow("saxpy_improved.sass");
  o.expect(bad >= 2, "cuBLAS listing: " + std::to_string(bad));
  o.expect(good == 0, "improved listing: " + std::to_string(good));
  auto exit_code = [](const char* file, const char* rules) {
    std::istringstream in;
    std::ostringstream out, err;
    std::vector<std::string> args = {"lint", "--arch", "t4"};
    if (rules) {
      args.push_back("--rules");
      args.push_back(rules);
    }
    args.push_back(std::string(SASSKIT_FIXTURES) + "/" + file);
    return cli::dispatch(args, in, out, err);
  };
  o.expect(exit_code("saxpy_cublas.sass", nullptr) == cli::kExitFindings, "exit code 3");
  o.expect(exit_code("saxpy_improved.sass", "a") == cli::kExitOk, "exit code 0");
  o.expect(exit_code("saxpy_improved.sass", "nope") == cli::kExitInput, "exit code 4");
  if (o.ok) o.detail = std::to_string(bad) + " vs 0 findings, exits 3/0/4";
  return o;
}

Outcome replacement_groups() {
  Outcome o;
  const std::vector<GpuArchProfile> profiles = {builtin_profile("T4"),
                                                builtin_profile("T4-L1-64"),
                                                builtin_profile("V100")};
  std::size_t evictions = 0;
  for (unsigned seed = 0; seed < 10000 && o.ok; ++seed) {
    const auto& profile = profiles[seed % profiles.size()];
    const auto* l1 = profile.data_cache("L1");
    std::mt19937_64 rng(seed);
    const std::uint64_t span = l1->size * (2 + seed % 3);
    std::uniform_int_distribution<std::uint64_t> addr(0, span - 1);
    AccessTrace t;
    std::set<std::uint64_t> touched;
    for (std::uint64_t i = 0; i < 2 * l1->size / l1->line; ++i) {
      Access a;
      a.address = addr(rng) & ~std::uint64_t{3};
      touched.insert(a.address / 128);
      t.push_back(a);
    }
    HierarchyOptions opt;
    opt.seed = seed;
    for (const auto& e : simulate_l1_replacement(t, profile, opt)) {
      ++evictions;
      o.expect(e.address % 128 == 0, "unaligned group at seed " + std::to_string(seed));
      o.expect(e.bytes == 4ull * l1->line, "group size at seed " + std::to_string(seed));
      o.expect(touched.contains(e.address / 128), "evicted a group never loaded");
    }
  }
  o.expect(evictions > 0, "no evictions");
  if (o.ok) o.detail = "10000 traces, " + std::to_string(evictions) + " evictions";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"control-codec bijection", control_bijection},
      {"Pascal bundle decode", pascal_bundle},
      {"bank-conflict oracle", bank_oracle},
      {"register reassignment", reassignment},
      {"scheduler mapping", scheduler_mapping},
      {"latency table", latency_table},
      {"p-chase classes", pchase_classes},
      {"icache plateaus", plateaus},
      {"aggressor-victim", aggressor_victim},
      {"shared bandwidth bounds", bandwidth},
      {"parser corpus", parser_corpus},
      {"lint", lint_counts},
      {"L1 replacement groups", replacement_groups},
  };
  int failed = 0;
  int n = 0;
  for (const auto& [name, fn] : criteria) {
    ++n;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.ok;
    std::printf("[%2d] %-26s %s  %s\n", n, name, o.ok ? "PASS" : "FAIL", o.detail.c_str());
  }
  std::printf("%d/%d criteria passed\n", n - failed, n);
  return failed ? 1 : 0;
}
