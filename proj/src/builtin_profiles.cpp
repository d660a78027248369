// Built-in profiles for the six boards characterized in the memory-hierarchy
// table: T4 (TU104), V100 (GV100), P100 (GP100), P4 (GP104), M60 (GM204) and
// K80 (GK210). Values marked approximate were measured, not nominal.

#include <algorithm>
#include <cctype>

#include "sasskit/error.hpp"
#include "sasskit/profile.hpp"

namespace sasskit {
namespace {

constexpr std::uint64_t KiB = 1024;
constexpr std::uint64_t MiB = 1024 * KiB;
constexpr std::uint64_t GiB = 1024 * MiB;
constexpr double GB = 1e9;

struct MemoryLatencies {
  int l1_hit;
  int l2_hit;
  int l2_miss_tlb_hit;
  int tlb_miss;
  bool derived_miss_latencies;  // true when the two miss classes are estimates
};

// Differences between the T4's measured p-chase classes (296 - 188 and
// 616 - 188); used to fill in the miss classes of the other boards.
constexpr int kL2MissOverHit = 108;
constexpr int kTlbMissOverHit = 428;

MemoryLatencies estimated(int l1_hit, int l2_hit) {
  return {l1_hit, l2_hit, l2_hit + kL2MissOverHit, l2_hit + kTlbMissOverHit,
          true};
}

void add_classes(GpuArchProfile& p, const std::string& cls, LatencyEntry e,
                 std::initializer_list<const char*> opcodes) {
  p.latency_table[cls] = e;
  for (const char* op : opcodes) p.opcode_classes[op] = cls;
}

void add_instruction_latencies(GpuArchProfile& p) {
  switch (p.generation) {
    case Generation::Turing:
      add_classes(p, "core-ALU", {4, false, false},
                  {"IADD3", "SHF", "LOP3", "SEL", "MOV", "FADD", "FFMA", "FMUL",
                   "ISETP", "FSET", "FSETP"});
      add_classes(p, "IMAD", {5, false, false}, {"IMAD", "FMNMX"});
      add_classes(p, "half", {6, false, false}, {"HADD2", "HMUL2", "HFMA2"});
      add_classes(p, "MUFU", {15, false, true}, {"POPC", "FLO", "BREV", "MUFU"});
      add_classes(p, "DADD", {48, false, true}, {"DADD", "DMUL"});
      add_classes(p, "DFMA", {54, false, true}, {"DFMA", "DSET", "DSETP"});
      break;
    case Generation::Volta:
      add_classes(p, "core-ALU", {4, false, false},
                  {"IADD3", "SHF", "LOP3", "SEL", "MOV", "FADD", "FFMA", "FMUL",
                   "ISETP", "FSET", "FSETP"});
      add_classes(p, "IMAD", {5, false, false},
                  {"IMAD", "FMNMX", "DSET", "DSETP"});
      add_classes(p, "half", {6, false, false}, {"HADD2", "HMUL2", "HFMA2"});
      add_classes(p, "double", {8, false, false}, {"DADD", "DMUL", "DFMA"});
      add_classes(p, "POPC", {10, false, true}, {"POPC"});
      add_classes(p, "MUFU", {14, false, true}, {"FLO", "BREV", "MUFU"});
      break;
    case Generation::Pascal:
    case Generation::Maxwell:
    case Generation::Kepler:
      add_classes(p, "core-ALU", {6, false, false},
                  {"BFE", "BFI", "IADD", "IADD32I", "FADD", "FMUL", "FFMA",
                   "FMNMX", "HADD2", "HMUL2", "HFMA2", "IMNMX", "ISCADD", "LOP",
                   "LOP32I", "LOP3", "MOV", "MOV32I", "SEL", "SHL", "SHR", "VADD",
                   "VABSDIFF", "VMNMX", "XMAD"});
      add_classes(p, "double", {8, false, false},
                  {"DADD", "DMUL", "DFMA", "DMNMX"});
      add_classes(p, "setp", {12, false, false},
                  {"FSET", "DSET", "DSETP", "ISETP", "FSETP"});
      add_classes(p, "MUFU", {14, false, true},
                  {"POPC", "FLO", "MUFU", "F2F", "F2I", "I2F", "I2I"});
      add_classes(p, "IMAD", {86, false, true}, {"IMUL", "IMAD"});
      break;
  }
  p.default_class = "core-ALU";
}

void add_memory_latencies(GpuArchProfile& p, MemoryLatencies m) {
  const bool est = m.derived_miss_latencies;
  p.latency_table["L1-hit"] = {m.l1_hit, true, false};
  p.latency_table["L2-hit"] = {m.l2_hit, true, true};
  p.latency_table["L2-miss-TLB-hit"] = {m.l2_miss_tlb_hit, true, est};
  p.latency_table["TLB-miss"] = {m.tlb_miss, true, est};
  p.latency_table["global-load"] = {m.l1_hit, true, false};
  p.latency_table["store"] = {m.l1_hit, true, false};
  p.latency_table["shared-load"] = {p.shared.no_conflict_latency, true, false};
  p.latency_table["const-load"] = {p.const_levels.front().broadcast_latency,
                                   true, true};
  for (const char* op : {"LDG", "LD", "LDL"}) p.opcode_classes[op] = "global-load";
  for (const char* op : {"STG", "ST", "STL", "STS"}) p.opcode_classes[op] = "store";
  p.opcode_classes["LDS"] = "shared-load";
  p.opcode_classes["LDC"] = "const-load";
}

CacheGeometry l1_data(std::uint64_t size, std::uint32_t line, int latency,
                      Replacement repl, std::uint64_t detected = 0) {
  CacheGeometry g;
  g.level_name = "L1";
  g.size = size;
  g.line = line;
  g.ways = 4;
  g.sets = static_cast<std::uint32_t>(size / (line * g.ways));
  g.hit_latency = latency;
  g.scope = Scope::SM;
  g.indexing = Indexing::Virtual;
  g.replacement = repl;
  g.detected_size = detected;
  return g;
}

CacheGeometry l2_data(std::uint64_t size, std::uint32_t line, int latency) {
  CacheGeometry g;
  g.level_name = "L2";
  g.size = size;
  g.line = line;
  g.ways = 16;
  g.sets = static_cast<std::uint32_t>(size / (line * g.ways));
  g.hit_latency = latency;
  g.scope = Scope::Chip;
  g.indexing = Indexing::Physical;
  g.replacement = Replacement::LRU;
  g.approximate = true;
  return g;
}

CacheGeometry icache(const char* name, std::uint64_t size, Scope scope,
                     double cpi, bool approximate) {
  CacheGeometry g;
  g.level_name = name;
  g.size = size;
  g.line = 128;
  g.hit_latency = 1;
  g.scope = scope;
  g.indexing = Indexing::Virtual;
  g.replacement = Replacement::LRU;
  g.approximate = approximate;
  g.fetch_cpi = cpi;
  return g;
}

// Fetch CPI per icache level; the memory CPI lives on the profile.
constexpr double kCpiNear = 1.0;
constexpr double kCpiMid = 2.0;
constexpr double kCpiL2 = 8.0;
constexpr double kCpiMemory = 40.0;

std::vector<CacheGeometry> turing_volta_icache(std::uint64_t l0, bool l0_approx,
                                               std::uint64_t l1, bool l1_approx,
                                               std::uint64_t l2) {
  return {icache("L0", l0, Scope::ProcessingBlock, kCpiNear, l0_approx),
          icache("L1", l1, Scope::SM, kCpiMid, l1_approx),
          icache("L2", l2, Scope::Chip, kCpiL2, false)};
}

std::vector<CacheGeometry> legacy_icache(std::uint64_t l15, std::uint64_t l2) {
  return {icache("L1", 8 * KiB, Scope::SM, kCpiNear, false),
          icache("L1.5", l15, Scope::SM, kCpiMid, false),
          icache("L2", l2, Scope::Chip, kCpiL2, false)};
}

std::vector<ConstCacheLevel> const_levels(int l1_lat, bool l1_approx,
                                          std::uint64_t l15_size,
                                          bool l15_size_approx, int l15_lat,
                                          bool l15_lat_approx,
                                          std::uint64_t l2_size,
                                          std::uint32_t l2_line, int l2_lat) {
  return {
      {"L1", 2 * KiB, 64, 8, 4, l1_lat, l1_approx},
      {"L1.5", l15_size, 256, 0, 0, l15_lat, l15_size_approx || l15_lat_approx},
      {"L2", l2_size, l2_line, 0, 0, l2_lat, true},
  };
}

std::vector<TlbGeometry> tlbs_2level(std::uint64_t l2_coverage,
                                     bool l1_approx) {
  return {{"L1", 2 * MiB, 32 * MiB, "TLB-miss", l1_approx},
          {"L2", 32 * MiB, l2_coverage, "TLB-miss", true}};
}

std::vector<TlbGeometry> tlbs_3level() {
  return {{"L1", 128 * KiB, 2 * MiB, "TLB-miss", true},
          {"L2", 2 * MiB, 128 * MiB, "TLB-miss", true},
          {"L3", 2 * MiB, 2 * GiB, "TLB-miss", true}};
}

void set_register_file(GpuArchProfile& p) {
  if (has_embedded_controls(p.generation)) {
    p.register_banks = 2;
    p.bank_width_bits = 64;
    p.bank_ports = 2;
  } else {
    p.register_banks = 4;
    p.bank_width_bits = 32;
    p.bank_ports = 1;
  }
}

void finish(GpuArchProfile& p, MemoryLatencies m) {
  set_register_file(p);
  add_instruction_latencies(p);
  add_memory_latencies(p, m);
  p.icache_memory_cpi = kCpiMemory;
  p.const_shares_icache = has_embedded_controls(p.generation);
}

GpuArchProfile make_t4(bool large_l1) {
  GpuArchProfile p;
  p.name = large_l1 ? "T4-L1-64" : "T4";
  p.generation = Generation::Turing;
  p.sm_count = 40;
  p.graphics_clock_mhz = 1590;
  p.memory_clock_mhz = 5001;
  p.threads_per_sm = 1024;
  p.memory = {large_l1 ? l1_data(64 * KiB, 32, 32, Replacement::RandomGroup4,
                                 57 * KiB)
                       : l1_data(32 * KiB, 32, 32, Replacement::RandomGroup4,
                                 25 * KiB),
              l2_data(4096 * KiB, 64, 188)};
  p.tlbs = tlbs_2level(8192 * MiB, false);
  p.shared = {large_l1 ? 32 * KiB : 64 * KiB, 32, 4, 16, 19, 2, false};
  p.const_levels =
      const_levels(26, true, 46 * KiB, true, 92, false, 4096 * KiB, 64, 215);
  p.icache_levels =
      turing_volta_icache(16 * KiB, true, 46 * KiB, true, 4096 * KiB);
  p.global_memory_size = 15079 * MiB;
  p.global_theoretical_bw = 320 * GB;
  p.global_measured_bw = 220 * GB;
  p.tdp_watts = 70;
  finish(p, {32, 188, 296, 616, false});
  return p;
}

GpuArchProfile make_v100() {
  GpuArchProfile p;
  p.name = "V100";
  p.generation = Generation::Volta;
  p.sm_count = 80;
  p.graphics_clock_mhz = 1380;
  p.memory_clock_mhz = 877;
  p.threads_per_sm = 2048;
  p.memory = {l1_data(32 * KiB, 32, 28, Replacement::RandomGroup4, 25 * KiB),
              l2_data(6144 * KiB, 64, 193)};
  p.tlbs = tlbs_2level(8192 * MiB, false);
  p.shared = {96 * KiB, 32, 4, 32, 19, 2, false};
  p.const_levels =
      const_levels(27, true, 64 * KiB, true, 89, true, 6144 * KiB, 64, 245);
  p.icache_levels =
      turing_volta_icache(12 * KiB, true, 128 * KiB, false, 6144 * KiB);
  p.global_memory_size = 16152 * MiB;
  p.global_theoretical_bw = 900 * GB;
  p.global_measured_bw = 750 * GB;
  p.tdp_watts = 250;
  finish(p, estimated(28, 193));
  return p;
}

GpuArchProfile make_p100() {
  GpuArchProfile p;
  p.name = "P100";
  p.generation = Generation::Pascal;
  p.sm_count = 56;
  p.graphics_clock_mhz = 1328;
  p.memory_clock_mhz = 715;
  p.threads_per_sm = 2048;
  p.memory = {l1_data(24 * KiB, 32, 82, Replacement::LRU),
              l2_data(4096 * KiB, 32, 234)};
  p.tlbs = tlbs_2level(2048 * MiB, true);
  p.shared = {64 * KiB, 32, 4, 16, 24, 2, false};
  p.const_levels =
      const_levels(24, true, 64 * KiB, true, 96, true, 4096 * KiB, 32, 236);
  p.icache_levels = legacy_icache(128 * KiB, 4096 * KiB);
  p.global_memory_size = 16276 * MiB;
  p.global_theoretical_bw = 732 * GB;
  p.global_measured_bw = 510 * GB;
  p.tdp_watts = 250;
  finish(p, estimated(82, 234));
  return p;
}

GpuArchProfile make_p4() {
  GpuArchProfile p;
  p.name = "P4";
  p.generation = Generation::Pascal;
  p.sm_count = 40;
  p.graphics_clock_mhz = 1531;
  p.memory_clock_mhz = 3003;
  p.threads_per_sm = 2048;
  p.memory = {l1_data(24 * KiB, 32, 82, Replacement::LRU),
              l2_data(2048 * KiB, 32, 216)};
  p.tlbs = tlbs_2level(2048 * MiB, true);
  p.shared = {64 * KiB, 32, 4, 16, 23, 2, false};
  p.const_levels =
      const_levels(25, true, 32 * KiB, false, 87, true, 2048 * KiB, 32, 225);
  p.icache_levels = legacy_icache(32 * KiB, 2048 * KiB);
  p.global_memory_size = 8115 * MiB;
  p.global_theoretical_bw = 192 * GB;
  p.global_measured_bw = 162 * GB;
  p.tdp_watts = 70;
  finish(p, estimated(82, 216));
  return p;
}

GpuArchProfile make_m60() {
  GpuArchProfile p;
  p.name = "M60";
  p.generation = Generation::Maxwell;
  p.sm_count = 16;
  p.graphics_clock_mhz = 1177;
  p.memory_clock_mhz = 2505;
  p.threads_per_sm = 2048;
  p.memory = {l1_data(24 * KiB, 32, 82, Replacement::LRU),
              l2_data(2048 * KiB, 32, 207)};
  p.tlbs = tlbs_3level();
  p.shared = {96 * KiB, 32, 4, 32, 23, 2, false};
  p.const_levels =
      const_levels(25, true, 32 * KiB, false, 81, true, 2048 * KiB, 32, 221);
  p.icache_levels = legacy_icache(32 * KiB, 2048 * KiB);
  p.global_memory_size = 8155 * MiB;
  p.global_theoretical_bw = 160 * GB;
  p.global_measured_bw = 127 * GB;
  p.tdp_watts = 250;
  finish(p, estimated(82, 207));
  return p;
}

GpuArchProfile make_k80() {
  GpuArchProfile p;
  p.name = "K80";
  p.generation = Generation::Kepler;
  p.sm_count = 13;
  p.graphics_clock_mhz = 875;
  p.memory_clock_mhz = 2505;
  p.threads_per_sm = 2048;
  p.memory = {l1_data(16 * KiB, 128, 35, Replacement::LRU),
              l2_data(1536 * KiB, 32, 200)};
  p.tlbs = tlbs_3level();
  p.shared = {48 * KiB, 32, 8, 32, 26, 2, true};
  p.const_levels =
      const_levels(30, true, 32 * KiB, false, 92, true, 1536 * KiB, 32, 220);
  p.icache_levels = legacy_icache(32 * KiB, 1536 * KiB);
  p.global_memory_size = 12237 * MiB;
  p.global_theoretical_bw = 240 * GB;
  p.global_measured_bw = 191 * GB;
  p.tdp_watts = 250;
  finish(p, estimated(35, 200));
  return p;
}

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

}  // namespace

std::vector<std::string> builtin_profiles() {
  return {"T4", "V100", "P100", "P4", "M60", "K80"};
}

GpuArchProfile builtin_profile(std::string_view name) {
  const std::string key = upper(name);
  if (key == "T4") return make_t4(false);
  if (key == "T4-L1-64") return make_t4(true);
  if (key == "V100") return make_v100();
  if (key == "P100") return make_p100();
  if (key == "P4") return make_p4();
  if (key == "M60") return make_m60();
  if (key == "K80") return make_k80();
  // Generation aliases pick the representative board.
  if (key == "TURING") return make_t4(false);
  if (key == "VOLTA") return make_v100();
  if (key == "PASCAL") return make_p4();
  if (key == "MAXWELL") return make_m60();
  if (key == "KEPLER") return make_k80();
  throw Error(ErrorCode::UnknownProfile,
              "unknown profile '" + std::string(name) + "'");
}

}  // namespace sasskit
