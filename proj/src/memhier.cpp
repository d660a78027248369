#include "sasskit/memhier.hpp"

#include <algorithm>
#include <cmath>

#include "sasskit/error.hpp"

namespace sasskit {

std::string_view to_string(LatencyClass c) {
  switch (c) {
    case LatencyClass::L1_HIT: return "L1_HIT";
    case LatencyClass::L2_HIT: return "L2_HIT";
    case LatencyClass::L2_MISS_TLB_HIT: return "L2_MISS_TLB_HIT";
    case LatencyClass::TLB_MISS: return "TLB_MISS";
    case LatencyClass::CONST_L1: return "CONST_L1";
    case LatencyClass::CONST_L15: return "CONST_L15";
    case LatencyClass::CONST_L2: return "CONST_L2";
    case LatencyClass::ICACHE_L0: return "ICACHE_L0";
    case LatencyClass::ICACHE_L1: return "ICACHE_L1";
    case LatencyClass::ICACHE_L2: return "ICACHE_L2";
    case LatencyClass::ICACHE_MEM: return "ICACHE_MEM";
  }
  return "?";
}

std::string_view to_string(AccessKind k) {
  switch (k) {
    case AccessKind::DataLoad: return "data-load";
    case AccessKind::InstructionFetch: return "instruction-fetch";
    case AccessKind::ConstLoad: return "const-load";
    case AccessKind::SharedLoad: return "shared-load";
  }
  return "?";
}

std::optional<AccessKind> access_kind_from_string(std::string_view s) {
  for (auto k : {AccessKind::DataLoad, AccessKind::InstructionFetch, AccessKind::ConstLoad,
                 AccessKind::SharedLoad})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

CacheModel::CacheModel(std::uint64_t size, std::uint32_t line, std::uint32_t ways,
                       Replacement policy, unsigned seed)
    : line_(line),
      group_(policy == Replacement::RandomGroup4 ? 4 : 1),
      policy_(policy),
      rng_(seed) {
  const std::uint64_t frame = std::uint64_t{line_} * group_;
  const std::uint64_t frames = std::max<std::uint64_t>(1, size / frame);
  ways_ = ways == 0 ? static_cast<std::uint32_t>(frames) : ways;
  const auto nsets = std::max<std::uint64_t>(1, frames / ways_);
  sets_.resize(nsets);
  fast_lru_ = nsets == 1 && policy_ == Replacement::LRU && ways_ > 32;
  if (!fast_lru_)
    for (auto& s : sets_) s.reserve(ways_);
}

std::uint64_t CacheModel::capacity() const {
  return std::uint64_t{line_} * group_ * ways_ * sets_.size();
}

bool CacheModel::contains(std::uint64_t address) const {
  const std::uint64_t ln = address / line_;
  const std::uint64_t grp = ln / group_;
  const auto bit = 1u << (ln % group_);
  if (fast_lru_) return where_.contains(ln);
  const auto& set = sets_[grp % sets_.size()];
  return std::any_of(set.begin(), set.end(),
                     [&](const Frame& f) { return f.tag == grp && (f.valid & bit); });
}

bool CacheModel::access(std::uint64_t address, std::vector<Eviction>* evicted) {
  const std::uint64_t ln = address / line_;
  const std::uint64_t grp = ln / group_;
  const auto bit = 1u << (ln % group_);
  if (fast_lru_) {
    if (auto it = where_.find(ln); it != where_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return true;
    }
    if (where_.size() >= ways_) {
      const auto old = lru_.back();
      if (evicted) evicted->push_back({0, old * line_, line_});
      where_.erase(old);
      lru_.pop_back();
    }
    lru_.push_front(ln);
    where_[ln] = lru_.begin();
    return false;
  }
  auto& set = sets_[grp % sets_.size()];
  ++clock_;
  for (auto& f : set)
    if (f.tag == grp) {
      const bool hit = (f.valid & bit) != 0;
      f.valid |= bit;
      if (policy_ == Replacement::LRU || hit) f.stamp = clock_;
      return hit;
    }
  if (set.size() < ways_) {
    set.push_back({grp, bit, clock_});
    return false;
  }
  std::size_t victim = 0;
  if (policy_ == Replacement::LRU) {
    for (std::size_t i = 1; i < set.size(); ++i)
      if (set[i].stamp < set[victim].stamp) victim = i;
  } else {
    victim = std::uniform_int_distribution<std::size_t>(0, set.size() - 1)(rng_);
  }
  if (evicted)
    evicted->push_back({0, set[victim].tag * group_ * line_, std::uint64_t{group_} * line_});
  set[victim] = {grp, bit, clock_};
  return false;
}

void CacheModel::clear() {
  for (auto& s : sets_) s.clear();
  lru_.clear();
  where_.clear();
}

std::size_t CacheModel::resident_lines() const {
  if (fast_lru_) return where_.size();
  std::size_t n = 0;
  for (const auto& s : sets_)
    for (const auto& f : s) n += static_cast<std::size_t>(__builtin_popcount(f.valid));
  return n;
}

namespace {

const CacheGeometry& require_cache(const GpuArchProfile& p, std::string_view level) {
  const auto* g = p.data_cache(level);
  if (!g)
    throw Error(ErrorCode::MalformedProfileFile,
                "profile " + p.name + " has no " + std::string(level) + " data cache");
  return *g;
}

int require_latency(const GpuArchProfile& p, const char* cls) {
  const auto* e = p.latency(cls);
  if (!e)
    throw Error(ErrorCode::UnresolvedLatency,
                "profile " + p.name + " has no latency class " + cls);
  return e->cycles;
}

CacheGeometry effective_l1(const GpuArchProfile& p, bool detected) {
  auto g = require_cache(p, "L1");
  if (detected && g.detected_size) {
    g.size = g.detected_size;
    g.sets = 0;
  }
  return g;
}

CacheModel make_cache(const CacheGeometry& g, unsigned seed) {
  std::uint32_t ways = g.ways;
  if (ways == 0 && g.sets) ways = static_cast<std::uint32_t>(g.size / (g.sets * g.line));
  return CacheModel(g.size, g.line, ways, g.replacement, seed);
}

CacheModel make_tlb(const TlbGeometry& t) {
  return CacheModel(t.coverage, static_cast<std::uint32_t>(t.page_entry), 0, Replacement::LRU);
}

}  // namespace

HierarchyState::HierarchyState(const GpuArchProfile& profile, HierarchyOptions options)
    : profile_(profile),
      options_(std::move(options)),
      l1_geom_(effective_l1(profile, options_.use_detected_l1)),
      l2_(make_cache(require_cache(profile, "L2"), options_.seed + 1)) {
  if (profile.tlbs.empty())
    throw Error(ErrorCode::MalformedProfileFile, "profile " + profile.name + " has no TLBs");
  for (std::size_t i = 1; i < profile.tlbs.size(); ++i)
    tlb_rest_.push_back(make_tlb(profile.tlbs[i]));
  lat_[0] = require_latency(profile, "L1-hit");
  lat_[1] = require_latency(profile, "L2-hit");
  lat_[2] = require_latency(profile, "L2-miss-TLB-hit");
  lat_[3] = require_latency(profile, "TLB-miss");
}

CacheModel& HierarchyState::l1_for(int sm) {
  auto it = l1_.find(sm);
  if (it == l1_.end())
    it = l1_.emplace(sm, make_cache(l1_geom_, options_.seed + static_cast<unsigned>(sm) * 7919u))
             .first;
  return it->second;
}

CacheModel& HierarchyState::tlb1_for(int sm) {
  auto it = tlb1_.find(sm);
  if (it == tlb1_.end()) it = tlb1_.emplace(sm, make_tlb(profile_.tlbs.front())).first;
  return it->second;
}

const CacheModel* HierarchyState::l1(int sm) const {
  auto it = l1_.find(sm);
  return it == l1_.end() ? nullptr : &it->second;
}

void HierarchyState::flush_l1() {
  for (auto& [sm, c] : l1_) c.clear();
}

LatencyTraceEntry HierarchyState::load(std::size_t index, const Access& a) {
  if (a.address >= profile_.global_memory_size)
    throw Error(ErrorCode::AddressBeyondModeledMemory,
                "address " + std::to_string(a.address) + " is beyond the " +
                    std::to_string(profile_.global_memory_size) + "-byte global memory");
  LatencyTraceEntry e;
  e.index = index;
  std::vector<Eviction> ev;
  if (l1_for(a.sm).access(a.address, &ev)) {
    e.cls = LatencyClass::L1_HIT;
    e.cycles = lat_[0];
    return e;
  }
  for (auto& x : ev) x.access = index;
  evictions_.insert(evictions_.end(), ev.begin(), ev.end());

  bool tlb_hit = tlb1_for(a.sm).access(a.address);
  if (!tlb_hit)
    for (auto& t : tlb_rest_)
      if (t.access(a.address)) break;
  const auto phys = options_.translate ? options_.translate(a.address) : a.address;
  const bool l2_hit = l2_.access(phys);
  if (!tlb_hit) {
    e.cls = LatencyClass::TLB_MISS;
    e.cycles = lat_[3];
  } else if (l2_hit) {
    e.cls = LatencyClass::L2_HIT;
    e.cycles = lat_[1];
  } else {
    e.cls = LatencyClass::L2_MISS_TLB_HIT;
    e.cycles = lat_[2];
  }
  return e;
}

std::vector<LatencyTraceEntry> classify_pchase(const AccessTrace& trace,
                                               const GpuArchProfile& profile,
                                               HierarchyState* state) {
  std::optional<HierarchyState> fresh;
  if (!state) state = &fresh.emplace(profile);
  std::vector<LatencyTraceEntry> out;
  out.reserve(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i].kind != AccessKind::DataLoad)
      throw Error(ErrorCode::InvalidField,
                  "access " + std::to_string(i) + " is not a data load");
    out.push_back(state->load(i, trace[i]));
  }
  return out;
}

AccessTrace pchase_trace(std::uint64_t array_bytes, std::uint64_t stride, int passes,
                         std::uint64_t base) {
  if (stride == 0) throw Error(ErrorCode::InvalidField, "stride must be positive");
  AccessTrace t;
  for (int p = 0; p < passes; ++p)
    for (std::uint64_t off = 0; off < array_bytes; off += stride)
      t.push_back({0, 0, 0, base + off, AccessKind::DataLoad});
  return t;
}

std::vector<Eviction> simulate_l1_replacement(const AccessTrace& trace,
                                              const GpuArchProfile& profile,
                                              const HierarchyOptions& options) {
  const auto g = effective_l1(profile, options.use_detected_l1);
  std::map<int, CacheModel> l1;
  std::vector<Eviction> out;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& a = trace[i];
    auto it = l1.find(a.sm);
    if (it == l1.end())
      it = l1.emplace(a.sm, make_cache(g, options.seed + static_cast<unsigned>(a.sm) * 7919u))
               .first;
    std::vector<Eviction> ev;
    it->second.access(a.address, &ev);
    for (auto& e : ev) {
      e.access = i;
      out.push_back(e);
    }
  }
  return out;
}

int instruction_bytes(const GpuArchProfile& p) {
  return has_embedded_controls(p.generation) ? 16 : 8;
}

IcacheLevelHit icache_cpi(std::uint64_t bytes, const GpuArchProfile& p) {
  if (bytes == 0) throw Error(ErrorCode::InvalidField, "sequence size must be positive");
  for (const auto& lvl : p.icache_levels)
    if (lvl.size >= bytes) return {lvl.level_name, lvl.fetch_cpi};
  return {"memory", p.icache_memory_cpi};
}

std::vector<std::uint64_t> sweep_sizes(std::uint64_t max_bytes) {
  constexpr std::uint64_t KiB = 1024;
  std::vector<std::uint64_t> out;
  for (std::uint64_t s = KiB; s < 64 * KiB && s <= max_bytes; s += KiB) out.push_back(s);
  for (std::uint64_t s = 64 * KiB; s <= max_bytes; s += 64 * KiB) out.push_back(s);
  return out;
}

Curve icache_sweep(const GpuArchProfile& p, std::uint64_t max_bytes) {
  if (max_bytes == 0) {
    const std::uint64_t largest = p.icache_levels.empty() ? 0 : p.icache_levels.back().size;
    max_bytes = std::max<std::uint64_t>(largest * 2, 128 * 1024);
  }
  Curve c;
  for (auto s : sweep_sizes(max_bytes)) c.emplace_back(s, icache_cpi(s, p).cpi);
  return c;
}

std::vector<std::uint64_t> detect_plateaus(const Curve& curve, double threshold) {
  if (curve.size() < 3)
    throw Error(ErrorCode::DegenerateCurve,
                "need at least 3 points, got " + std::to_string(curve.size()));
  std::vector<std::uint64_t> out;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double prev = curve[i - 1].second;
    const double step = curve[i].second - prev;
    const double rel = prev != 0 ? step / std::abs(prev) : (step != 0 ? INFINITY : 0);
    if (rel > threshold) out.push_back(curve[i - 1].first);
  }
  return out;
}

namespace {

constexpr std::uint32_t kIcacheLine = 128;

// Instruction-side hierarchy with one cache instance per scope owner.
class IcacheSim {
 public:
  explicit IcacheSim(const GpuArchProfile& p) : p_(p) {}

  double fetch(int sm, int block, std::uint64_t address) {
    for (std::size_t lvl = 0; lvl < p_.icache_levels.size(); ++lvl) {
      if (instance(lvl, sm, block).access(address)) {
        for (std::size_t k = 0; k < lvl; ++k) instance(k, sm, block).access(address);
        return p_.icache_levels[lvl].fetch_cpi;
      }
    }
    for (std::size_t k = 0; k < p_.icache_levels.size(); ++k) instance(k, sm, block).access(address);
    return p_.icache_memory_cpi;
  }

  double run(int sm, int block, std::uint64_t base, std::uint64_t bytes) {
    double sum = 0;
    std::uint64_t n = 0;
    for (std::uint64_t off = 0; off < bytes; off += kIcacheLine, ++n)
      sum += fetch(sm, block, base + off);
    return n ? sum / static_cast<double>(n) : 0.0;
  }

 private:
  CacheModel& instance(std::size_t lvl, int sm, int block) {
    const auto& g = p_.icache_levels[lvl];
    const long owner = g.scope == Scope::Chip ? 0
                       : g.scope == Scope::SM ? sm
                                              : sm * 64L + block;
    auto key = std::make_pair(lvl, owner);
    auto it = caches_.find(key);
    if (it == caches_.end())
      it = caches_.emplace(key, CacheModel(g.size, kIcacheLine, 0, Replacement::LRU)).first;
    return it->second;
  }

  const GpuArchProfile& p_;
  std::map<std::pair<std::size_t, long>, CacheModel> caches_;
};

constexpr std::uint64_t kVictimBase = 0;
constexpr std::uint64_t kAggressorProbeBase = std::uint64_t{1} << 36;
constexpr std::uint64_t kAggressorThrashBase = std::uint64_t{1} << 37;

double probe_alone(const GpuArchProfile& p, std::uint64_t base, std::uint64_t bytes,
                   int iterations) {
  IcacheSim sim(p);
  sim.run(0, 0, base, bytes);
  double sum = 0;
  for (int i = 0; i < iterations; ++i) sum += sim.run(0, 0, base, bytes);
  return sum / iterations;
}

}  // namespace

AggressorVictimResult run_aggressor_victim(const AggressorVictimSpec& spec,
                                           const GpuArchProfile& p) {
  if (spec.aggressor_bytes == 0 || spec.victim_bytes == 0)
    throw Error(ErrorCode::InvalidField, "aggressor and victim sizes must be positive");
  const int iters = std::max(1, spec.iterations);
  const int vsm = 0, vblock = 0;
  const int asm_ = spec.placement == Placement::DifferentSm ? 1 : 0;
  const int ablock = spec.placement == Placement::DifferentSm ? 0 : 1;

  AggressorVictimResult r;
  r.victim_baseline_cpi = probe_alone(p, kVictimBase, spec.victim_bytes, iters);
  r.aggressor_baseline_cpi = probe_alone(p, kAggressorProbeBase, spec.victim_bytes, iters);

  IcacheSim sim(p);
  auto aggressor_pass = [&] {
    sim.run(asm_, ablock, kAggressorThrashBase, spec.aggressor_bytes);
    return sim.run(asm_, ablock, kAggressorProbeBase, spec.victim_bytes);
  };
  sim.run(vsm, vblock, kVictimBase, spec.victim_bytes);
  aggressor_pass();
  double vsum = 0, asum = 0;
  for (int i = 0; i < iters; ++i) {
    vsum += sim.run(vsm, vblock, kVictimBase, spec.victim_bytes);
    asum += aggressor_pass();
  }
  r.victim_cpi = vsum / iters;
  r.aggressor_cpi = asum / iters;
  return r;
}

int shared_latency(int degree, const GpuArchProfile& p) {
  const auto& s = p.shared;
  if (degree < 1 || degree > s.banks)
    throw Error(ErrorCode::DegreeOutOfRange,
                "conflict degree " + std::to_string(degree) + " outside 1.." +
                    std::to_string(s.banks));
  if (s.dual_ported_banks) {
    const int extra = degree <= 2 ? 0 : (degree - 2 + 1) / 2;
    return s.no_conflict_latency + s.conflict_slope * extra;
  }
  return s.no_conflict_latency + s.conflict_slope * (degree - 1);
}

double shared_bandwidth_bound(const GpuArchProfile& p) {
  const auto& s = p.shared;
  const double hz = p.graphics_clock_mhz * 1e6;
  const double bank_bound = p.sm_count * s.banks * s.bank_width * hz;
  const double lsu_bound = p.sm_count * s.lsu_per_sm * s.bank_width * hz;
  return std::min(bank_bound, lsu_bound);
}

int const_latency(int distinct, std::string_view level, const GpuArchProfile& p) {
  const auto* c = p.const_level(level);
  if (!c) throw Error(ErrorCode::LevelUnknown, "no constant cache level '" + std::string(level) + "'");
  if (distinct < 1 || distinct > 32)
    throw Error(ErrorCode::ValueOutOfRange,
                "distinct address count " + std::to_string(distinct) + " outside 1..32");
  return distinct * c->broadcast_latency;
}

double const_icache_interaction(std::uint64_t aggressor_bytes, std::uint64_t victim_bytes,
                                const GpuArchProfile& p) {
  if (victim_bytes == 0) throw Error(ErrorCode::InvalidField, "victim size must be positive");
  const auto* l15 = p.const_level("L1.5");
  if (!l15) throw Error(ErrorCode::LevelUnknown, "profile has no L1.5 constant cache");
  const CacheGeometry* l1i = nullptr;
  for (const auto& g : p.icache_levels)
    if (g.level_name == "L1") l1i = &g;
  const bool shared = p.const_shares_icache && l1i;
  const std::uint64_t cap = shared ? l1i->size : l15->size;
  CacheModel pool(cap, kIcacheLine, 0, Replacement::LRU);
  const std::uint64_t vbase = 0;
  const std::uint64_t abase = std::uint64_t{1} << 36;
  for (std::uint64_t off = 0; off < victim_bytes; off += kIcacheLine) pool.access(vbase + off);
  if (shared)
    for (std::uint64_t off = 0; off < aggressor_bytes; off += kIcacheLine)
      pool.access(abase + off);
  std::uint64_t lines = 0, missing = 0;
  for (std::uint64_t off = 0; off < victim_bytes; off += kIcacheLine, ++lines)
    if (!pool.contains(vbase + off)) ++missing;
  return static_cast<double>(missing) / static_cast<double>(lines);
}

}  // namespace sasskit
