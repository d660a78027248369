#pragma once

// Architecture profiles: every microarchitectural parameter the analyses and
// simulators consume. Units are fixed per field: bytes, cycles, MHz, bytes/s.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sasskit {

enum class Generation { Kepler, Maxwell, Pascal, Volta, Turing };

std::string_view to_string(Generation g);
std::optional<Generation> generation_from_string(std::string_view s);

/// Volta and Turing embed control bits in each 128-bit instruction.
constexpr bool has_embedded_controls(Generation g) {
  return g == Generation::Volta || g == Generation::Turing;
}

enum class Scope { ProcessingBlock, SM, Chip };
enum class Indexing { Virtual, Physical };
enum class Replacement { LRU, NonLRU, RandomGroup4 };

std::string_view to_string(Scope s);
std::string_view to_string(Indexing i);
std::string_view to_string(Replacement r);

struct CacheGeometry {
  std::string level_name;
  std::uint64_t size = 0;  // bytes
  std::uint32_t line = 0;  // bytes
  std::uint32_t sets = 0;  // 0 = unspecified
  std::uint32_t ways = 0;  // 0 = unspecified
  int hit_latency = 0;     // cycles
  Scope scope = Scope::SM;
  Indexing indexing = Indexing::Virtual;
  Replacement replacement = Replacement::LRU;
  bool approximate = false;
  // Capacity observable with a pointer chase, when it differs from nominal.
  std::uint64_t detected_size = 0;
  // Instruction caches only: average clocks per instruction when this level
  // serves the fetch stream.
  double fetch_cpi = 0.0;

  bool operator==(const CacheGeometry&) const = default;
};

struct TlbGeometry {
  std::string level_name;
  std::uint64_t page_entry = 0;  // bytes
  std::uint64_t coverage = 0;    // bytes
  std::string miss_penalty_class;
  bool approximate = false;

  std::uint64_t entries() const { return page_entry ? coverage / page_entry : 0; }
  bool operator==(const TlbGeometry&) const = default;
};

struct SharedMemParams {
  std::uint64_t size_per_sm = 0;  // bytes
  int banks = 0;
  int bank_width = 0;  // bytes
  int lsu_per_sm = 0;
  int no_conflict_latency = 0;
  int conflict_slope = 0;
  bool dual_ported_banks = false;

  bool operator==(const SharedMemParams&) const = default;
};

struct ConstCacheLevel {
  std::string level_name;
  std::uint64_t size = 0;
  std::uint32_t line = 0;
  std::uint32_t sets = 0;
  std::uint32_t ways = 0;
  int broadcast_latency = 0;
  bool approximate = false;

  bool operator==(const ConstCacheLevel&) const = default;
};

struct LatencyEntry {
  int cycles = 0;
  bool variable = false;
  bool approximate = false;

  bool operator==(const LatencyEntry&) const = default;
};

struct GpuArchProfile {
  std::string name;
  Generation generation = Generation::Turing;
  int sm_count = 0;
  double graphics_clock_mhz = 0;
  double memory_clock_mhz = 0;
  int threads_per_sm = 0;
  int schedulers_per_sm = 4;
  int register_banks = 0;
  int bank_width_bits = 0;
  int bank_ports = 0;
  // Extra issue cycles per same-bank read beyond port capacity.
  int conflict_penalty = 1;

  std::map<std::string, LatencyEntry> latency_table;
  std::map<std::string, std::string> opcode_classes;
  std::string default_class;

  std::vector<CacheGeometry> memory;  // data caches, nearest first
  std::vector<TlbGeometry> tlbs;      // nearest first
  SharedMemParams shared;
  std::vector<ConstCacheLevel> const_levels;  // nearest first
  std::vector<CacheGeometry> icache_levels;   // nearest first
  double icache_memory_cpi = 0;
  // Turing/Volta: the second constant level and the L1 instruction cache
  // are the same physical array.
  bool const_shares_icache = false;

  std::uint64_t global_memory_size = 0;
  double global_theoretical_bw = 0;  // bytes/s
  double global_measured_bw = 0;     // bytes/s, reference only
  double tdp_watts = 0;              // reference only

  bool operator==(const GpuArchProfile&) const = default;

  const CacheGeometry* data_cache(std::string_view level) const;
  const ConstCacheLevel* const_level(std::string_view level) const;
  const LatencyEntry* latency(std::string_view cls) const;
  /// Latency class of an opcode; falls back to default_class.
  std::string class_of(std::string_view opcode) const;
};

struct Violation {
  std::string field;
  std::string message;

  bool operator==(const Violation&) const = default;
};

std::vector<std::string> builtin_profiles();
GpuArchProfile builtin_profile(std::string_view name);

/// Accepts a built-in name (case-insensitive), a generation alias such as
/// "pascal", a named variant ("T4-L1-64"), or a path to a JSON profile.
GpuArchProfile load_profile(std::string_view source);
GpuArchProfile profile_from_json_text(std::string_view text);
std::string profile_to_json_text(const GpuArchProfile& profile);

std::vector<Violation> validate_profile(const GpuArchProfile& profile);

}  // namespace sasskit
