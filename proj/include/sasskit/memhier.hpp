#pragma once

// Memory-hierarchy simulator: data caches and TLBs for pointer chases,
// instruction caches, constant caches and shared-memory banks.

#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sasskit/profile.hpp"

namespace sasskit {

enum class LatencyClass {
  L1_HIT,
  L2_HIT,
  L2_MISS_TLB_HIT,
  TLB_MISS,
  CONST_L1,
  CONST_L15,
  CONST_L2,
  ICACHE_L0,
  ICACHE_L1,
  ICACHE_L2,
  ICACHE_MEM,
};
std::string_view to_string(LatencyClass c);

enum class AccessKind { DataLoad, InstructionFetch, ConstLoad, SharedLoad };
std::string_view to_string(AccessKind k);
std::optional<AccessKind> access_kind_from_string(std::string_view s);

struct Access {
  int warp = 0;
  int sm = 0;
  int block = 0;
  std::uint64_t address = 0;
  AccessKind kind = AccessKind::DataLoad;
};
using AccessTrace = std::vector<Access>;

struct LatencyTraceEntry {
  std::size_t index = 0;
  LatencyClass cls = LatencyClass::L1_HIT;
  int cycles = 0;
};

struct Eviction {
  std::size_t access = 0;  // index of the access that caused it
  std::uint64_t address = 0;
  std::uint64_t bytes = 0;
};

/// Set-associative cache. ways = 0 makes it fully associative. Under
/// RandomGroup4 a frame holds 4 consecutive lines that are evicted together.
class CacheModel {
 public:
  CacheModel(std::uint64_t size, std::uint32_t line, std::uint32_t ways, Replacement policy,
             unsigned seed = 1);
  // The recency index holds iterators into lru_, so copies would dangle.
  CacheModel(const CacheModel&) = delete;
  CacheModel& operator=(const CacheModel&) = delete;
  CacheModel(CacheModel&&) noexcept = default;
  CacheModel& operator=(CacheModel&&) noexcept = default;

  /// Looks up and fills on miss; returns true on hit.
  bool access(std::uint64_t address, std::vector<Eviction>* evicted = nullptr);
  bool contains(std::uint64_t address) const;
  void clear();

  std::size_t resident_lines() const;
  std::uint32_t sets() const { return static_cast<std::uint32_t>(sets_.size()); }
  std::uint32_t ways() const { return ways_; }
  std::uint32_t line() const { return line_; }
  std::uint64_t capacity() const;

 private:
  struct Frame {
    std::uint64_t tag = 0;
    std::uint32_t valid = 0;  // bit per line in the group
    std::uint64_t stamp = 0;
  };

  std::uint32_t line_;
  std::uint32_t group_;
  std::uint32_t ways_;
  Replacement policy_;
  std::vector<std::vector<Frame>> sets_;
  // Large fully associative LRU caches: recency list plus index.
  bool fast_lru_ = false;
  std::list<std::uint64_t> lru_;
  std::unordered_map<std::uint64_t, std::list<std::uint64_t>::iterator> where_;
  std::mt19937 rng_;
  std::uint64_t clock_ = 0;
};

struct HierarchyOptions {
  unsigned seed = 1;
  bool use_detected_l1 = false;
  // Virtual to physical mapping used for the physically indexed levels.
  std::function<std::uint64_t(std::uint64_t)> translate;
};

/// Per-scope instances of the data-side hierarchy: one L1 and one L1 TLB
/// per SM, one chip-wide L2 and one L2 TLB.
class HierarchyState {
 public:
  explicit HierarchyState(const GpuArchProfile& profile, HierarchyOptions options = {});

  LatencyTraceEntry load(std::size_t index, const Access& access);
  void flush_l1();

  const CacheModel* l1(int sm) const;
  const CacheModel& l2() const { return l2_; }
  std::size_t l1_instances() const { return l1_.size(); }
  const std::vector<Eviction>& l1_evictions() const { return evictions_; }

 private:
  CacheModel& l1_for(int sm);
  CacheModel& tlb1_for(int sm);

  const GpuArchProfile& profile_;
  HierarchyOptions options_;
  CacheGeometry l1_geom_;
  std::map<int, CacheModel> l1_;
  std::map<int, CacheModel> tlb1_;
  CacheModel l2_;
  std::vector<CacheModel> tlb_rest_;
  std::vector<Eviction> evictions_;
  int lat_[4] = {};
};

std::vector<LatencyTraceEntry> classify_pchase(const AccessTrace& trace,
                                               const GpuArchProfile& profile,
                                               HierarchyState* state = nullptr);

/// `passes` scans of an array with the given stride, starting at `base`.
AccessTrace pchase_trace(std::uint64_t array_bytes, std::uint64_t stride, int passes = 1,
                         std::uint64_t base = 0);

std::vector<Eviction> simulate_l1_replacement(const AccessTrace& trace,
                                              const GpuArchProfile& profile,
                                              const HierarchyOptions& options = {});

/// Bytes per encoded instruction: 16 on Volta/Turing, 8 before.
int instruction_bytes(const GpuArchProfile& profile);

struct IcacheLevelHit {
  std::string level;  // an icache level name, or "memory"
  double cpi = 0.0;
};

IcacheLevelHit icache_cpi(std::uint64_t sequence_bytes, const GpuArchProfile& profile);

using Curve = std::vector<std::pair<std::uint64_t, double>>;

/// Sizes in 1 KiB steps below 64 KiB and 64 KiB steps above, up to `max_bytes`.
std::vector<std::uint64_t> sweep_sizes(std::uint64_t max_bytes);
Curve icache_sweep(const GpuArchProfile& profile, std::uint64_t max_bytes = 0);

/// Last size before each relative CPI step larger than `threshold`.
std::vector<std::uint64_t> detect_plateaus(const Curve& curve, double threshold = 0.2);

enum class Placement { SameSmDifferentBlock, DifferentSm };

struct AggressorVictimSpec {
  std::uint64_t aggressor_bytes = 0;
  std::uint64_t victim_bytes = 0;
  Placement placement = Placement::SameSmDifferentBlock;
  int iterations = 4;
};

struct AggressorVictimResult {
  double aggressor_cpi = 0.0;  // over the aggressor's probe
  double victim_cpi = 0.0;
  double aggressor_baseline_cpi = 0.0;
  double victim_baseline_cpi = 0.0;
};

AggressorVictimResult run_aggressor_victim(const AggressorVictimSpec& spec,
                                           const GpuArchProfile& profile);

int shared_latency(int conflict_degree, const GpuArchProfile& profile);
/// Bytes per second.
double shared_bandwidth_bound(const GpuArchProfile& profile);

int const_latency(int distinct_addresses, std::string_view level, const GpuArchProfile& profile);

/// Fraction of the victim's constant lines that miss after the aggressor
/// streams its instructions.
double const_icache_interaction(std::uint64_t aggressor_instruction_bytes,
                                std::uint64_t victim_const_bytes, const GpuArchProfile& profile);

}  // namespace sasskit
