#include "sasskit/profile.hpp"

#include <algorithm>
#include <cctype>

namespace sasskit {

std::string_view to_string(Generation g) {
  switch (g) {
    case Generation::Kepler: return "Kepler";
    case Generation::Maxwell: return "Maxwell";
    case Generation::Pascal: return "Pascal";
    case Generation::Volta: return "Volta";
    case Generation::Turing: return "Turing";
  }
  return "?";
}

std::optional<Generation> generation_from_string(std::string_view s) {
  std::string key(s);
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (key == "kepler") return Generation::Kepler;
  if (key == "maxwell") return Generation::Maxwell;
  if (key == "pascal") return Generation::Pascal;
  if (key == "volta") return Generation::Volta;
  if (key == "turing") return Generation::Turing;
  return std::nullopt;
}

std::string_view to_string(Scope s) {
  switch (s) {
    case Scope::ProcessingBlock: return "ProcessingBlock";
    case Scope::SM: return "SM";
    case Scope::Chip: return "Chip";
  }
  return "?";
}

std::string_view to_string(Indexing i) {
  return i == Indexing::Virtual ? "Virtual" : "Physical";
}

std::string_view to_string(Replacement r) {
  switch (r) {
    case Replacement::LRU: return "LRU";
    case Replacement::NonLRU: return "NonLRU";
    case Replacement::RandomGroup4: return "RandomGroup4";
  }
  return "?";
}

const CacheGeometry* GpuArchProfile::data_cache(std::string_view level) const {
  for (const auto& c : memory)
    if (c.level_name == level) return &c;
  return nullptr;
}

const ConstCacheLevel* GpuArchProfile::const_level(std::string_view level) const {
  for (const auto& c : const_levels)
    if (c.level_name == level) return &c;
  return nullptr;
}

const LatencyEntry* GpuArchProfile::latency(std::string_view cls) const {
  auto it = latency_table.find(std::string(cls));
  return it == latency_table.end() ? nullptr : &it->second;
}

std::string GpuArchProfile::class_of(std::string_view opcode) const {
  auto it = opcode_classes.find(std::string(opcode));
  return it == opcode_classes.end() ? default_class : it->second;
}

namespace {

class Checker {
 public:
  void positive(const std::string& field, double value) {
    if (!(value > 0)) fail(field, "must be > 0");
  }
  void fail(const std::string& field, const std::string& message) {
    out.push_back({field, message});
  }
  std::vector<Violation> out;
};

void check_cache(Checker& c, const std::string& path, const CacheGeometry& g,
                 bool instruction) {
  if (g.level_name.empty()) c.fail(path + ".level_name", "must be non-empty");
  c.positive(path + ".size", static_cast<double>(g.size));
  c.positive(path + ".line", g.line);
  if (g.line > 0 && g.size % g.line != 0)
    c.fail(path + ".size", "must be a multiple of line");
  if (g.sets > 0 && g.ways > 0 &&
      static_cast<std::uint64_t>(g.sets) * g.ways * g.line != g.size)
    c.fail(path + ".sets", "sets x ways x line must equal size");
  c.positive(path + ".hit_latency", g.hit_latency);
  if (g.detected_size > g.size)
    c.fail(path + ".detected_size", "must not exceed size");
  if (instruction) c.positive(path + ".fetch_cpi", g.fetch_cpi);
}

}  // namespace

std::vector<Violation> validate_profile(const GpuArchProfile& p) {
  Checker c;
  if (p.name.empty()) c.fail("name", "must be non-empty");
  c.positive("sm_count", p.sm_count);
  c.positive("graphics_clock_mhz", p.graphics_clock_mhz);
  c.positive("memory_clock_mhz", p.memory_clock_mhz);
  c.positive("threads_per_sm", p.threads_per_sm);
  c.positive("schedulers_per_sm", p.schedulers_per_sm);
  c.positive("register_banks", p.register_banks);
  c.positive("bank_width_bits", p.bank_width_bits);
  c.positive("bank_ports", p.bank_ports);
  if (p.conflict_penalty < 0) c.fail("conflict_penalty", "must be >= 0");

  const bool two_bank = has_embedded_controls(p.generation);
  const int want_banks = two_bank ? 2 : 4;
  const int want_width = two_bank ? 64 : 32;
  const int want_ports = two_bank ? 2 : 1;
  const std::string gen(to_string(p.generation));
  if (p.register_banks > 0 && p.register_banks != want_banks)
    c.fail("register_banks", gen + " requires " + std::to_string(want_banks) +
                                 " register banks");
  if (p.bank_width_bits > 0 && p.bank_width_bits != want_width)
    c.fail("bank_width_bits", gen + " requires " + std::to_string(want_width) +
                                  "-bit banks");
  if (p.bank_ports > 0 && p.bank_ports != want_ports)
    c.fail("bank_ports", gen + " requires " + std::to_string(want_ports) +
                             " ports per bank");

  for (const auto& [cls, entry] : p.latency_table)
    c.positive("latency_table." + cls + ".cycles", entry.cycles);
  for (const auto& [op, cls] : p.opcode_classes)
    if (!p.latency_table.contains(cls))
      c.fail("opcode_classes." + op, "class '" + cls + "' not in latency_table");
  if (!p.latency_table.contains(p.default_class))
    c.fail("default_class", "class '" + p.default_class + "' not in latency_table");
  for (const char* required : {"L1-hit", "L2-hit", "L2-miss-TLB-hit", "TLB-miss",
                               "global-load", "shared-load", "store", "const-load"})
    if (!p.latency_table.contains(required))
      c.fail(std::string("latency_table.") + required, "missing memory class");

  for (std::size_t i = 0; i < p.memory.size(); ++i)
    check_cache(c, "memory[" + std::to_string(i) + "]", p.memory[i], false);
  if (!p.data_cache("L1")) c.fail("memory", "missing level L1");
  if (!p.data_cache("L2")) c.fail("memory", "missing level L2");

  for (std::size_t i = 0; i < p.tlbs.size(); ++i) {
    const auto& t = p.tlbs[i];
    const std::string path = "tlbs[" + std::to_string(i) + "]";
    c.positive(path + ".page_entry", static_cast<double>(t.page_entry));
    c.positive(path + ".coverage", static_cast<double>(t.coverage));
    if (t.page_entry > 0 && t.coverage % t.page_entry != 0)
      c.fail(path + ".coverage", "must be a multiple of page_entry");
    if (!p.latency_table.contains(t.miss_penalty_class))
      c.fail(path + ".miss_penalty_class",
             "class '" + t.miss_penalty_class + "' not in latency_table");
  }
  if (p.tlbs.empty()) c.fail("tlbs", "at least one TLB level required");

  c.positive("shared.size_per_sm", static_cast<double>(p.shared.size_per_sm));
  c.positive("shared.banks", p.shared.banks);
  c.positive("shared.bank_width", p.shared.bank_width);
  c.positive("shared.lsu_per_sm", p.shared.lsu_per_sm);
  c.positive("shared.no_conflict_latency", p.shared.no_conflict_latency);
  if (p.shared.conflict_slope < 0) c.fail("shared.conflict_slope", "must be >= 0");

  for (std::size_t i = 0; i < p.const_levels.size(); ++i) {
    const auto& k = p.const_levels[i];
    const std::string path = "const_levels[" + std::to_string(i) + "]";
    c.positive(path + ".size", static_cast<double>(k.size));
    c.positive(path + ".line", k.line);
    c.positive(path + ".broadcast_latency", k.broadcast_latency);
    if (k.sets > 0 && k.ways > 0 &&
        static_cast<std::uint64_t>(k.sets) * k.ways * k.line != k.size)
      c.fail(path + ".sets", "sets x ways x line must equal size");
  }
  if (p.const_levels.empty()) c.fail("const_levels", "at least one level required");

  for (std::size_t i = 0; i < p.icache_levels.size(); ++i)
    check_cache(c, "icache_levels[" + std::to_string(i) + "]", p.icache_levels[i],
                true);
  for (std::size_t i = 1; i < p.icache_levels.size(); ++i)
    if (p.icache_levels[i].size <= p.icache_levels[i - 1].size)
      c.fail("icache_levels[" + std::to_string(i) + "].size",
             "must exceed the previous level");
  c.positive("icache_memory_cpi", p.icache_memory_cpi);

  c.positive("global_memory_size", static_cast<double>(p.global_memory_size));
  c.positive("global_theoretical_bw", p.global_theoretical_bw);
  return c.out;
}

}  // namespace sasskit
