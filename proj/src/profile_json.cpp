#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "sasskit/error.hpp"
#include "sasskit/profile.hpp"

namespace sasskit {
namespace {

using nlohmann::ordered_json;

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::MalformedProfileFile, what);
}

ordered_json cache_json(const CacheGeometry& g) {
  return {{"level_name", g.level_name},
          {"size", g.size},
          {"line", g.line},
          {"sets", g.sets},
          {"ways", g.ways},
          {"hit_latency", g.hit_latency},
          {"scope", to_string(g.scope)},
          {"indexing", to_string(g.indexing)},
          {"replacement", to_string(g.replacement)},
          {"approximate", g.approximate},
          {"detected_size", g.detected_size},
          {"fetch_cpi", g.fetch_cpi}};
}

// Reads fields out of one JSON object, reporting failures with a field path.
class Reader {
 public:
  Reader(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) malformed(where("") + ": expected an object");
  }

  const ordered_json& at(const std::string& key) const {
    auto it = j_.find(key);
    if (it == j_.end()) malformed(where(key) + ": missing field");
    return *it;
  }

  template <typename T>
  T get(const std::string& key) const {
    const auto& v = at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("boolean");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw std::invalid_argument("unsigned");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw std::invalid_argument("integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("number");
      }
      return v.get<T>();
    } catch (const std::exception&) {
      malformed(where(key) + ": wrong type (" + std::string(v.type_name()) + ")");
    }
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) const {
    return j_.contains(key) ? get<T>(key) : fallback;
  }

  std::string where(const std::string& key) const {
    if (key.empty()) return "field '" + path_ + "'";
    return "field '" + (path_.empty() ? key : path_ + "." + key) + "'";
  }

  std::string child(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const ordered_json& j_;
  std::string path_;
};

template <typename E, std::size_t N>
E parse_enum(const Reader& r, const std::string& key,
             const std::pair<E, const char*> (&table)[N]) {
  const auto s = r.get<std::string>(key);
  for (const auto& [value, name] : table)
    if (s == name) return value;
  malformed(r.where(key) + ": unknown value '" + s + "'");
}

constexpr std::pair<Scope, const char*> kScopes[] = {
    {Scope::ProcessingBlock, "ProcessingBlock"}, {Scope::SM, "SM"}, {Scope::Chip, "Chip"}};
constexpr std::pair<Indexing, const char*> kIndexing[] = {
    {Indexing::Virtual, "Virtual"}, {Indexing::Physical, "Physical"}};
constexpr std::pair<Replacement, const char*> kReplacement[] = {
    {Replacement::LRU, "LRU"},
    {Replacement::NonLRU, "NonLRU"},
    {Replacement::RandomGroup4, "RandomGroup4"}};

CacheGeometry read_cache(const ordered_json& j, const std::string& path) {
  Reader r(j, path);
  CacheGeometry g;
  g.level_name = r.get<std::string>("level_name");
  g.size = r.get<std::uint64_t>("size");
  g.line = r.get<std::uint32_t>("line");
  g.sets = r.get_or<std::uint32_t>("sets", 0);
  g.ways = r.get_or<std::uint32_t>("ways", 0);
  g.hit_latency = r.get<int>("hit_latency");
  g.scope = parse_enum(r, "scope", kScopes);
  g.indexing = parse_enum(r, "indexing", kIndexing);
  g.replacement = parse_enum(r, "replacement", kReplacement);
  g.approximate = r.get_or<bool>("approximate", false);
  g.detected_size = r.get_or<std::uint64_t>("detected_size", 0);
  g.fetch_cpi = r.get_or<double>("fetch_cpi", 0.0);
  return g;
}

template <typename F>
auto read_list(const Reader& r, const std::string& key, F&& read_one) {
  const auto& arr = r.at(key);
  if (!arr.is_array()) malformed(r.where(key) + ": expected an array");
  std::vector<decltype(read_one(arr, std::string()))> out;
  for (std::size_t i = 0; i < arr.size(); ++i)
    out.push_back(read_one(arr[i], r.child(key) + "[" + std::to_string(i) + "]"));
  return out;
}

std::pair<std::size_t, std::size_t> line_col(std::string_view text,
                                             std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

std::string profile_to_json_text(const GpuArchProfile& p) {
  ordered_json j;
  j["name"] = p.name;
  j["generation"] = to_string(p.generation);
  j["sm_count"] = p.sm_count;
  j["graphics_clock_mhz"] = p.graphics_clock_mhz;
  j["memory_clock_mhz"] = p.memory_clock_mhz;
  j["threads_per_sm"] = p.threads_per_sm;
  j["schedulers_per_sm"] = p.schedulers_per_sm;
  j["register_banks"] = p.register_banks;
  j["bank_width_bits"] = p.bank_width_bits;
  j["bank_ports"] = p.bank_ports;
  j["conflict_penalty"] = p.conflict_penalty;
  ordered_json lat = ordered_json::object();
  for (const auto& [cls, e] : p.latency_table)
    lat[cls] = {{"cycles", e.cycles}, {"variable", e.variable},
                {"approximate", e.approximate}};
  j["latency_table"] = lat;
  ordered_json ops = ordered_json::object();
  for (const auto& [op, cls] : p.opcode_classes) ops[op] = cls;
  j["opcode_classes"] = ops;
  j["default_class"] = p.default_class;
  j["memory"] = ordered_json::array();
  for (const auto& g : p.memory) j["memory"].push_back(cache_json(g));
  j["tlbs"] = ordered_json::array();
  for (const auto& t : p.tlbs)
    j["tlbs"].push_back({{"level_name", t.level_name},
                         {"page_entry", t.page_entry},
                         {"coverage", t.coverage},
                         {"miss_penalty_class", t.miss_penalty_class},
                         {"approximate", t.approximate}});
  j["shared"] = {{"size_per_sm", p.shared.size_per_sm},
                 {"banks", p.shared.banks},
                 {"bank_width", p.shared.bank_width},
                 {"lsu_per_sm", p.shared.lsu_per_sm},
                 {"no_conflict_latency", p.shared.no_conflict_latency},
                 {"conflict_slope", p.shared.conflict_slope},
                 {"dual_ported_banks", p.shared.dual_ported_banks}};
  j["const_levels"] = ordered_json::array();
  for (const auto& k : p.const_levels)
    j["const_levels"].push_back({{"level_name", k.level_name},
                                 {"size", k.size},
                                 {"line", k.line},
                                 {"sets", k.sets},
                                 {"ways", k.ways},
                                 {"broadcast_latency", k.broadcast_latency},
                                 {"approximate", k.approximate}});
  j["icache_levels"] = ordered_json::array();
  for (const auto& g : p.icache_levels) j["icache_levels"].push_back(cache_json(g));
  j["icache_memory_cpi"] = p.icache_memory_cpi;
  j["const_shares_icache"] = p.const_shares_icache;
  j["global_memory_size"] = p.global_memory_size;
  j["global_theoretical_bw"] = p.global_theoretical_bw;
  j["global_measured_bw"] = p.global_measured_bw;
  j["tdp_watts"] = p.tdp_watts;
  return j.dump(2) + "\n";
}

GpuArchProfile profile_from_json_text(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    malformed("line " + std::to_string(line) + ", column " + std::to_string(col) +
              ": invalid JSON");
  }
  Reader r(j, "");
  GpuArchProfile p;
  p.name = r.get<std::string>("name");
  const auto gen = r.get<std::string>("generation");
  if (auto g = generation_from_string(gen)) {
    p.generation = *g;
  } else {
    malformed(r.where("generation") + ": unknown value '" + gen + "'");
  }
  p.sm_count = r.get<int>("sm_count");
  p.graphics_clock_mhz = r.get<double>("graphics_clock_mhz");
  p.memory_clock_mhz = r.get<double>("memory_clock_mhz");
  p.threads_per_sm = r.get<int>("threads_per_sm");
  p.schedulers_per_sm = r.get<int>("schedulers_per_sm");
  p.register_banks = r.get<int>("register_banks");
  p.bank_width_bits = r.get<int>("bank_width_bits");
  p.bank_ports = r.get<int>("bank_ports");
  p.conflict_penalty = r.get_or<int>("conflict_penalty", 1);

  const auto& lat = r.at("latency_table");
  if (!lat.is_object()) malformed(r.where("latency_table") + ": expected an object");
  for (auto it = lat.begin(); it != lat.end(); ++it) {
    Reader e(it.value(), "latency_table." + it.key());
    p.latency_table[it.key()] = {e.get<int>("cycles"), e.get<bool>("variable"),
                                 e.get_or<bool>("approximate", false)};
  }
  const auto& ops = r.at("opcode_classes");
  if (!ops.is_object()) malformed(r.where("opcode_classes") + ": expected an object");
  for (auto it = ops.begin(); it != ops.end(); ++it) {
    if (!it.value().is_string())
      malformed("field 'opcode_classes." + it.key() + "': wrong type");
    p.opcode_classes[it.key()] = it.value().get<std::string>();
  }
  p.default_class = r.get<std::string>("default_class");

  p.memory = read_list(r, "memory", read_cache);
  p.tlbs = read_list(r, "tlbs", [](const ordered_json& t, const std::string& path) {
    Reader tr(t, path);
    return TlbGeometry{tr.get<std::string>("level_name"),
                       tr.get<std::uint64_t>("page_entry"),
                       tr.get<std::uint64_t>("coverage"),
                       tr.get<std::string>("miss_penalty_class"),
                       tr.get_or<bool>("approximate", false)};
  });
  {
    Reader s(r.at("shared"), "shared");
    p.shared.size_per_sm = s.get<std::uint64_t>("size_per_sm");
    p.shared.banks = s.get<int>("banks");
    p.shared.bank_width = s.get<int>("bank_width");
    p.shared.lsu_per_sm = s.get<int>("lsu_per_sm");
    p.shared.no_conflict_latency = s.get<int>("no_conflict_latency");
    p.shared.conflict_slope = s.get<int>("conflict_slope");
    p.shared.dual_ported_banks = s.get<bool>("dual_ported_banks");
  }
  p.const_levels =
      read_list(r, "const_levels", [](const ordered_json& k, const std::string& path) {
        Reader kr(k, path);
        return ConstCacheLevel{kr.get<std::string>("level_name"),
                               kr.get<std::uint64_t>("size"),
                               kr.get<std::uint32_t>("line"),
                               kr.get_or<std::uint32_t>("sets", 0),
                               kr.get_or<std::uint32_t>("ways", 0),
                               kr.get<int>("broadcast_latency"),
                               kr.get_or<bool>("approximate", false)};
      });
  p.icache_levels = read_list(r, "icache_levels", read_cache);
  p.icache_memory_cpi = r.get<double>("icache_memory_cpi");
  p.const_shares_icache = r.get_or<bool>("const_shares_icache", false);
  p.global_memory_size = r.get<std::uint64_t>("global_memory_size");
  p.global_theoretical_bw = r.get<double>("global_theoretical_bw");
  p.global_measured_bw = r.get_or<double>("global_measured_bw", 0.0);
  p.tdp_watts = r.get_or<double>("tdp_watts", 0.0);

  if (auto violations = validate_profile(p); !violations.empty()) {
    std::string msg = "profile '" + p.name + "' is invalid:";
    for (const auto& v : violations) msg += " field '" + v.field + "': " + v.message + ";";
    malformed(msg);
  }
  return p;
}

GpuArchProfile load_profile(std::string_view source) {
  namespace fs = std::filesystem;
  const fs::path path{std::string(source)};
  std::error_code ec;
  if (fs::is_regular_file(path, ec)) {
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      return profile_from_json_text(buf.str());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ": " + e.what());
    }
  }
  return builtin_profile(source);
}

}  // namespace sasskit
