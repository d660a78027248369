#include "sasskit/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "sasskit/banks.hpp"
#include "sasskit/error.hpp"
#include "sasskit/issue.hpp"
#include "sasskit/lint.hpp"
#include "sasskit/memhier.hpp"
#include "sasskit/profile.hpp"
#include "sasskit/sass.hpp"

namespace sasskit::cli {
namespace {

using json = nlohmann::ordered_json;

struct Common {
  std::string arch;
  std::string format = "text";
  unsigned seed = 1;
  int ctl_offset = 105;
  std::string bundle_order = "lowest";
  std::string input;
  CLI::Option* arch_opt = nullptr;

  bool arch_given() const { return arch_opt && arch_opt->count() > 0; }
};

std::string default_arch() {
  const char* env = std::getenv("SASSKIT_ARCH");
  return env && *env ? env : "T4";
}

void add_common(CLI::App* app, Common& c, bool with_input) {
  c.arch_opt = app->add_option("--arch", c.arch, "profile name, generation or JSON file")
                   ->default_str(c.arch);
  app->add_option("--format", c.format, "output format")
      ->check(CLI::IsMember({"text", "json", "csv"}))
      ->capture_default_str();
  app->add_option("--seed", c.seed, "seed for randomized models")->capture_default_str();
  app->add_option("--ctl-offset", c.ctl_offset, "control section bit offset (Volta/Turing)")
      ->capture_default_str();
  app->add_option("--bundle-order", c.bundle_order, "section order inside a bundle")
      ->check(CLI::IsMember({"lowest", "highest"}))
      ->capture_default_str();
  if (with_input) app->add_option("input", c.input, "listing file, '-' or omitted for stdin");
}

std::string hex(std::uint64_t v, int width = 0) {
  std::ostringstream s;
  s << "0x" << std::hex << std::setfill('0');
  if (width) s << std::setw(width);
  s << v;
  return s.str();
}

std::uint64_t parse_number(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidField, "not a number: '" + text + "'");
  }
}

std::uint64_t parse_size(const std::string& text) {
  static const std::pair<const char*, std::uint64_t> units[] = {
      {"GiB", 1ull << 30}, {"MiB", 1ull << 20}, {"KiB", 1ull << 10},
      {"G", 1ull << 30},   {"M", 1ull << 20},   {"K", 1ull << 10}, {"B", 1}};
  for (const auto& [suffix, mult] : units) {
    const std::string_view s(suffix);
    if (text.size() > s.size() && text.ends_with(s))
      return parse_number(text.substr(0, text.size() - s.size())) * mult;
  }
  return parse_number(text);
}

std::string read_input(const std::string& path, std::istream& in) {
  std::ostringstream buf;
  if (path.empty() || path == "-") {
    buf << in.rdbuf();
    return buf.str();
  }
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::UsageError, "cannot open '" + path + "'");
  buf << f.rdbuf();
  return buf.str();
}

ControlLayout layout_for(Generation g, const Common& c) {
  return default_layout(g, c.ctl_offset,
                        c.bundle_order == "highest" ? BundleOrder::HighestFirst
                                                    : BundleOrder::LowestFirst);
}

void require_format(const Common& c, std::initializer_list<const char*> allowed) {
  for (const char* f : allowed)
    if (c.format == f) return;
  throw Error(ErrorCode::UsageError, "--format " + c.format + " is not available here");
}

// ---- JSON views --------------------------------------------------------------

json operand_json(const Operand& op) {
  json j;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, GeneralReg>) {
          j["kind"] = "register";
          j["index"] = v.index;
        } else if constexpr (std::is_same_v<T, UniformReg>) {
          j["kind"] = "uniform_register";
          j["index"] = v.index;
        } else if constexpr (std::is_same_v<T, PredicateReg>) {
          j["kind"] = "predicate";
          j["index"] = v.index;
        } else if constexpr (std::is_same_v<T, ConstRef>) {
          j["kind"] = "constant";
          j["bank"] = v.bank;
          j["offset"] = v.offset;
        } else if constexpr (std::is_same_v<T, MemRef>) {
          j["kind"] = "memory";
          j["base"] = v.base.index;
          j["offset"] = v.offset;
        } else if constexpr (std::is_same_v<T, Immediate>) {
          j["kind"] = "immediate";
          if (v.is_float)
            j["value"] = v.real;
          else
            j["value"] = v.integer;
        } else {
          j["kind"] = "symbol";
        }
      },
      op.value);
  j["text"] = render_operand(op);
  j["attributes"] = op.attributes;
  return j;
}

json control_json(const ControlInfo& c) {
  json reuse = json::array();
  for (int s = 0; s < 4; ++s) reuse.push_back(c.reuses(s));
  json wait = json::array();
  for (int b = 0; b < kNumBarriers; ++b)
    if (c.waits_on(b)) wait.push_back(b);
  return {{"reuse", reuse},           {"wait", wait},       {"read_barrier", c.read_barrier},
          {"write_barrier", c.write_barrier}, {"yield", c.yield}, {"stall", c.stall}};
}

json words_json(const std::vector<std::uint64_t>& w) {
  json a = json::array();
  for (auto x : w) a.push_back(hex(x, 16));
  return a;
}

json program_json(const Program& p) {
  json j;
  j["arch"] = p.arch ? json(std::string(to_string(*p.arch))) : json(nullptr);
  json list = json::array();
  for (std::size_t i = 0; i < p.instructions.size(); ++i) {
    const auto& in = p.instructions[i];
    json e;
    e["index"] = i;
    e["address"] = in.address ? json(*in.address) : json(nullptr);
    if (in.predicate)
      e["predicate"] = {{"negated", in.predicate->negated},
                        {"index", in.predicate->index},
                        {"uniform", in.predicate->uniform}};
    else
      e["predicate"] = nullptr;
    e["opcode"] = in.opcode;
    e["modifiers"] = in.modifiers;
    json ops = json::array();
    for (const auto& op : in.operands) ops.push_back(operand_json(op));
    e["operands"] = ops;
    e["raw_words"] = words_json(in.raw_words);
    e["leading_words"] = words_json(in.leading_words);
    e["text"] = render_instruction(in);
    if (p.controls) e["control"] = control_json((*p.controls)[i]);
    list.push_back(e);
  }
  j["instructions"] = list;
  j["trailing_words"] = words_json(p.trailing_words);
  return j;
}

json conflicts_json(const ConflictReport& r) {
  json list = json::array();
  for (const auto& ic : r.instructions) {
    json reads = json::array();
    for (const auto& rd : ic.reads)
      reads.push_back({{"slot", rd.slot}, {"register", rd.reg}, {"bank", rd.bank},
                       {"reuse_hit", rd.reuse_hit}});
    list.push_back({{"index", ic.index},
                    {"address", ic.address ? json(*ic.address) : json(nullptr)},
                    {"reads", reads},
                    {"port_demand", ic.port_demand},
                    {"reuse_hits", ic.reuse_hits},
                    {"conflict_cycles", ic.conflict_cycles}});
  }
  return {{"instructions", list},
          {"total_conflict_cycles", r.total_conflict_cycles},
          {"total_reuse_hits", r.total_reuse_hits},
          {"conflicting_instructions", r.conflicting_instructions}};
}

json renaming_json(const std::map<int, int>& m) {
  json j = json::object();
  for (const auto& [from, to] : m) j["R" + std::to_string(from)] = "R" + std::to_string(to);
  return j;
}

std::string address_text(const std::optional<std::uint64_t>& a) {
  return a ? hex(*a, 4) : "-";
}

// ---- subcommands -------------------------------------------------------------

struct Context {
  std::istream& in;
  std::ostream& out;
};

int run_parse(const Common& c, bool controls, Context& io) {
  require_format(c, {"text", "json"});
  ParseOptions opt;
  if (c.arch_given()) opt.arch = load_profile(c.arch).generation;
  auto p = parse_listing(read_input(c.input, io.in), opt);
  if (controls) {
    if (!p.arch) throw Error(ErrorCode::MissingControls, "architecture unknown; pass --arch");
    attach_controls(p, layout_for(*p.arch, c));
  }
  if (c.format == "json")
    io.out << program_json(p).dump(2) << "\n";
  else
    io.out << render_program(p);
  return kExitOk;
}

struct DecodedSection {
  std::size_t index;
  std::uint32_t raw;
  std::optional<ControlInfo> info;
};

int run_decode(const Common& c, const std::vector<std::string>& values, bool section,
               bool bundle, Context& io) {
  const auto g = load_profile(c.arch).generation;
  const auto layout = layout_for(g, c);
  std::vector<std::uint64_t> words;
  for (const auto& v : values) words.push_back(parse_number(v));
  std::vector<DecodedSection> out;
  if (section) {
    for (auto w : words)
      out.push_back({out.size(), static_cast<std::uint32_t>(w),
                     decode_control_section(w > kSectionMask ? kSectionMask + 1u
                                                             : static_cast<std::uint32_t>(w))});
  } else if (bundle || has_embedded_controls(g)) {
    for (const auto& s : extract_controls(words, layout))
      out.push_back({out.size(), s.raw, s.info});
  } else {
    for (auto w : words)
      for (const auto& s : decode_control_word(w, layout))
        out.push_back({out.size(), s.raw, s.info});
  }
  const int width = g == Generation::Kepler && !section ? 2 : 6;
  if (c.format == "json") {
    json list = json::array();
    for (const auto& d : out) {
      json e = {{"index", d.index}, {"raw", hex(d.raw, width)}};
      if (d.info) e["fields"] = control_json(*d.info);
      list.push_back(e);
    }
    io.out << json{{"arch", std::string(to_string(g))}, {"sections", list}}.dump(2) << "\n";
  } else if (c.format == "csv") {
    io.out << "index,raw,reuse,wait_mask,read_barrier,write_barrier,yield,stall\n";
    for (const auto& d : out) {
      io.out << d.index << "," << hex(d.raw, width);
      if (d.info)
        io.out << "," << hex(d.info->reuse) << "," << hex(d.info->wait_mask) << ","
               << int(d.info->read_barrier) << "," << int(d.info->write_barrier) << ","
               << int(d.info->yield) << "," << int(d.info->stall);
      else
        io.out << ",,,,,,";
      io.out << "\n";
    }
  } else {
    for (const auto& d : out) {
      io.out << "section " << d.index << ": " << hex(d.raw, width);
      if (d.info) {
        const auto& i = *d.info;
        std::string reuse;
        for (int s = 3; s >= 0; --s) reuse += i.reuses(s) ? '1' : '0';
        std::string wait;
        for (int b = 0; b < kNumBarriers; ++b)
          if (i.waits_on(b)) wait += (wait.empty() ? "" : ",") + std::to_string(b);
        io.out << "  reuse " << reuse << "  wait {" << wait << "}  read " << int(i.read_barrier)
               << "  write " << int(i.write_barrier) << "  yield " << int(i.yield) << "  stall "
               << int(i.stall);
      }
      io.out << "\n";
    }
  }
  return kExitOk;
}

struct EncodeArgs {
  int reuse = 0;
  std::vector<int> wait;
  int read = kNoBarrier;
  int write = kNoBarrier;
  int yield = 1;
  int stall = 1;
  std::vector<std::string> sections;
};

int run_encode(const Common& c, const EncodeArgs& a, Context& io) {
  require_format(c, {"text", "json"});
  json j;
  std::string text;
  if (!a.sections.empty()) {
    const auto g = load_profile(c.arch).generation;
    const auto layout = layout_for(g, c);
    std::vector<ControlSection> secs;
    for (const auto& s : a.sections)
      secs.push_back({static_cast<std::uint32_t>(parse_number(s)), std::nullopt});
    const auto word = encode_control_word(secs, layout);
    text = hex(word, 16);
    j = {{"arch", std::string(to_string(g))}, {"word", text}};
  } else {
    auto range = [](int v, int hi, const char* what) {
      if (v < 0 || v > hi)
        throw Error(ErrorCode::InvalidField, std::string(what) + " out of range");
      return static_cast<std::uint8_t>(v);
    };
    ControlInfo info;
    info.reuse = range(a.reuse, 0xF, "reuse");
    info.wait_mask = 0;
    for (int b : a.wait) {
      if (b < 0 || b >= kNumBarriers)
        throw Error(ErrorCode::InvalidField, "wait barrier " + std::to_string(b) + " > 5");
      info.wait_mask |= static_cast<std::uint8_t>(1u << b);
    }
    info.read_barrier = range(a.read, 7, "read barrier");
    info.write_barrier = range(a.write, 7, "write barrier");
    info.yield = a.yield != 0;
    info.stall = range(a.stall, 255, "stall");
    const auto raw = encode_control_section(info);
    text = hex(raw, 6);
    j = {{"section", text}, {"value", raw}, {"fields", control_json(info)}};
  }
  if (c.format == "json")
    io.out << j.dump(2) << "\n";
  else
    io.out << text << "\n";
  return kExitOk;
}

Program load_program(const Common& c, const GpuArchProfile& profile, std::istream& in) {
  ParseOptions opt;
  if (c.arch_given()) opt.arch = profile.generation;
  return parse_listing(read_input(c.input, in), opt);
}

int run_banks(const Common& c, bool reuse, Context& io) {
  const auto profile = load_profile(c.arch);
  const auto p = load_program(c, profile, io.in);
  const auto rep = analyze_conflicts(p, profile, reuse);
  if (c.format == "json") {
    auto j = conflicts_json(rep);
    j["arch"] = profile.name;
    io.out << j.dump(2) << "\n";
  } else if (c.format == "csv") {
    io.out << "index,address,registers,port_demand,reuse_hits,conflict_cycles\n";
    for (const auto& ic : rep.instructions) {
      std::string regs, demand;
      for (const auto& r : ic.reads) regs += (regs.empty() ? "" : " ") + std::to_string(r.reg);
      for (int d : ic.port_demand) demand += (demand.empty() ? "" : " ") + std::to_string(d);
      io.out << ic.index << "," << address_text(ic.address) << "," << regs << "," << demand
             << "," << ic.reuse_hits << "," << ic.conflict_cycles << "\n";
    }
  } else {
    for (const auto& ic : rep.instructions) {
      io.out << std::setw(4) << ic.index << "  " << render_instruction(p.instructions[ic.index])
             << "  // demand";
      for (int d : ic.port_demand) io.out << " " << d;
      if (ic.reuse_hits) io.out << "  reuse " << ic.reuse_hits;
      if (ic.conflict_cycles) io.out << "  CONFLICT +" << ic.conflict_cycles;
      io.out << "\n";
    }
    io.out << "total conflict cycles: " << rep.total_conflict_cycles << "\n";
  }
  return kExitOk;
}

int run_reassign(const Common& c, int budget, Context& io) {
  require_format(c, {"text", "json"});
  const auto profile = load_profile(c.arch);
  const auto p = load_program(c, profile, io.in);
  ReassignOptions opt;
  opt.budget = budget;
  opt.seed = c.seed;
  const auto r = reassign_registers(p, profile, opt);
  if (c.format == "json") {
    io.out << json{{"renaming", renaming_json(r.renaming)},
                   {"conflict_cycles_before", r.before.total_conflict_cycles},
                   {"conflict_cycles_after", r.after.total_conflict_cycles},
                   {"listing", render_program(r.program)}}
                  .dump(2)
           << "\n";
  } else {
    io.out << render_program(r.program);
    io.out << "// rename-map: " << renaming_json(r.renaming).dump() << "\n";
    io.out << "// conflict cycles: " << r.before.total_conflict_cycles << " -> "
           << r.after.total_conflict_cycles << "\n";
  }
  return kExitOk;
}

struct ScheduleArgs {
  std::string assume = "l1hit";
  int read_hold = 1;
  bool strict = false;
  bool no_conflicts = false;
  bool default_controls = false;
};

ScheduleOptions schedule_options(const ScheduleArgs& a) {
  static const std::map<std::string, std::string> classes = {{"l1hit", "L1-hit"},
                                                             {"l2hit", "L2-hit"},
                                                             {"l2miss", "L2-miss-TLB-hit"},
                                                             {"tlbmiss", "TLB-miss"}};
  ScheduleOptions o;
  o.memory_class = classes.at(a.assume);
  o.read_hold = a.read_hold;
  o.strict = a.strict;
  o.model_conflicts = !a.no_conflicts;
  return o;
}

Program program_with_controls(const Common& c, const GpuArchProfile& profile,
                              const ScheduleArgs& a, std::istream& in) {
  auto p = load_program(c, profile, in);
  if (!a.default_controls && !p.words().empty())
    attach_controls(p, layout_for(p.arch.value_or(profile.generation), c));
  return p;
}

int run_schedule(const Common& c, const ScheduleArgs& a, Context& io) {
  const auto profile = load_profile(c.arch);
  const auto p = program_with_controls(c, profile, a, io.in);
  const auto t = schedule_warp(p, profile, schedule_options(a));
  if (c.format == "json") {
    json list = json::array();
    for (const auto& e : t.entries)
      list.push_back({{"index", e.index},
                      {"address", e.address ? json(*e.address) : json(nullptr)},
                      {"opcode", e.opcode},
                      {"latency_class", e.latency_class},
                      {"latency", e.latency},
                      {"issue_cycle", e.issue_cycle},
                      {"complete_cycle", e.complete_cycle},
                      {"stall_source", std::string(to_string(e.stall_source))},
                      {"conflict_cycles", e.conflict_cycles},
                      {"control", control_json(t.controls[e.index])}});
    json hz = json::array();
    for (const auto& h : t.hazards)
      hz.push_back({{"producer", h.producer},
                    {"consumer", h.consumer},
                    {"register", h.reg},
                    {"ready_cycle", h.ready_cycle},
                    {"issue_cycle", h.issue_cycle}});
    io.out << json{{"arch", profile.name},
                   {"instructions", list},
                   {"hazards", hz},
                   {"total_cycles", t.total_cycles},
                   {"cpi", t.cpi}}
                  .dump(2)
           << "\n";
  } else {
    const bool csv = c.format == "csv";
    if (csv)
      io.out << "index,address,opcode,class,latency,issue,complete,source\n";
    else
      io.out << "index  address  opcode        class            lat   issue  complete  source\n";
    for (const auto& e : t.entries) {
      if (csv) {
        io.out << e.index << "," << address_text(e.address) << "," << e.opcode << ","
               << e.latency_class << "," << e.latency << "," << e.issue_cycle << ","
               << e.complete_cycle << "," << to_string(e.stall_source) << "\n";
      } else {
        io.out << std::left << std::setw(7) << e.index << std::setw(9)
               << address_text(e.address) << std::setw(14) << e.opcode << std::setw(17)
               << e.latency_class << std::right << std::setw(4) << e.latency << std::setw(8)
               << e.issue_cycle << std::setw(10) << e.complete_cycle << "  "
               << to_string(e.stall_source) << "\n";
      }
    }
    if (!csv) {
      io.out << "total cycles " << t.total_cycles << ", CPI " << std::fixed
             << std::setprecision(3) << t.cpi << "\n";
      for (const auto& h : t.hazards)
        io.out << "hazard: instruction " << h.consumer << " reads R" << h.reg << " at cycle "
               << h.issue_cycle << ", ready at " << h.ready_cycle << "\n";
    }
  }
  return kExitOk;
}

int run_multiwarp(const Common& c, const ScheduleArgs& a, const std::string& warps,
                  int iterations, Context& io) {
  const auto profile = load_profile(c.arch);
  auto p = program_with_controls(c, profile, a, io.in);
  if (iterations > 1) {
    Program r = p;
    r.instructions.clear();
    if (r.controls) r.controls->clear();
    for (int k = 0; k < iterations; ++k) {
      r.instructions.insert(r.instructions.end(), p.instructions.begin(), p.instructions.end());
      if (p.controls) r.controls->insert(r.controls->end(), p.controls->begin(), p.controls->end());
    }
    p = std::move(r);
  }
  std::vector<WarpProgram> wp;
  std::stringstream ss(warps);
  for (std::string tok; std::getline(ss, tok, ',');)
    if (!tok.empty()) wp.push_back({static_cast<int>(parse_number(tok)), p});
  if (wp.empty()) throw Error(ErrorCode::UsageError, "--warps needs at least one warp id");
  const auto r = simulate_multiwarp(wp, profile, schedule_options(a));
  if (c.format == "json") {
    json list = json::array();
    for (const auto& s : r.schedulers)
      list.push_back({{"scheduler", s.scheduler},
                      {"warps", s.warps},
                      {"instructions", s.instructions},
                      {"cycles", s.busy_until},
                      {"ipc", s.ipc}});
    io.out << json{{"arch", profile.name},
                   {"schedulers", list},
                   {"total_instructions", r.total_instructions},
                   {"total_cycles", r.total_cycles},
                   {"aggregate_ipc", r.aggregate_ipc},
                   {"gflops", r.gflops ? json(*r.gflops) : json(nullptr)}}
                  .dump(2)
           << "\n";
  } else {
    io.out << "scheduler,warps,instructions,cycles,ipc\n";
    for (const auto& s : r.schedulers) {
      std::string w;
      for (int id : s.warps) w += (w.empty() ? "" : " ") + std::to_string(id);
      io.out << s.scheduler << "," << w << "," << s.instructions << "," << s.busy_until << ","
             << std::fixed << std::setprecision(4) << s.ipc << "\n";
    }
    io.out << "all,," << r.total_instructions << "," << r.total_cycles << "," << std::fixed
           << std::setprecision(4) << r.aggregate_ipc << "\n";
    if (r.gflops && c.format == "text")
      io.out << "GFLOPS " << std::setprecision(1) << *r.gflops << "\n";
  }
  return kExitOk;
}

struct PchaseArgs {
  std::string trace;
  std::string array_bytes = "64KiB";
  std::string stride = "32";
  int passes = 2;
  std::string base = "0";
  bool detected = false;
};

AccessTrace read_trace(const std::string& text) {
  AccessTrace t;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line.starts_with("index")) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    if (f.size() < 2)
      throw Error(ErrorCode::InvalidField,
                  "trace line " + std::to_string(line_no) + ": expected index,address[,kind[,sm]]");
    Access a;
    a.address = parse_number(f[1]);
    if (f.size() > 2 && !f[2].empty()) {
      auto k = access_kind_from_string(f[2]);
      if (!k)
        throw Error(ErrorCode::InvalidField,
                    "trace line " + std::to_string(line_no) + ": unknown kind '" + f[2] + "'");
      a.kind = *k;
    }
    if (f.size() > 3 && !f[3].empty()) a.sm = static_cast<int>(parse_number(f[3]));
    t.push_back(a);
  }
  return t;
}

int run_pchase(const Common& c, const PchaseArgs& a, Context& io) {
  const auto profile = load_profile(c.arch);
  const auto trace = a.trace.empty()
                         ? pchase_trace(parse_size(a.array_bytes), parse_size(a.stride), a.passes,
                                        parse_size(a.base))
                         : read_trace(read_input(a.trace, io.in));
  HierarchyOptions opt;
  opt.seed = c.seed;
  opt.use_detected_l1 = a.detected;
  HierarchyState state(profile, opt);
  const auto entries = classify_pchase(trace, profile, &state);
  std::map<std::string, int> counts;
  for (const auto& e : entries) ++counts[std::string(to_string(e.cls))];
  if (c.format == "json") {
    json list = json::array();
    for (const auto& e : entries)
      list.push_back({{"index", e.index},
                      {"address", trace[e.index].address},
                      {"class", std::string(to_string(e.cls))},
                      {"cycles", e.cycles}});
    io.out << json{{"arch", profile.name}, {"accesses", list}, {"summary", counts}}.dump(2)
           << "\n";
  } else {
    io.out << "index,class,cycles\n";
    for (const auto& e : entries)
      io.out << e.index << "," << to_string(e.cls) << "," << e.cycles << "\n";
    if (c.format == "text")
      for (const auto& [cls, n] : counts) io.out << "# " << cls << " " << n << "\n";
  }
  return kExitOk;
}

int run_icache_sweep(const Common& c, const std::string& max_bytes, Context& io) {
  const auto profile = load_profile(c.arch);
  const auto curve = icache_sweep(profile, max_bytes.empty() ? 0 : parse_size(max_bytes));
  const auto bounds = detect_plateaus(curve);
  if (c.format == "json") {
    json pts = json::array();
    for (const auto& [s, cpi] : curve)
      pts.push_back({{"bytes", s}, {"cpi", cpi}, {"level", icache_cpi(s, profile).level}});
    io.out << json{{"arch", profile.name}, {"curve", pts}, {"plateaus", bounds}}.dump(2) << "\n";
  } else {
    io.out << "bytes,cpi,level\n";
    for (const auto& [s, cpi] : curve)
      io.out << s << "," << cpi << "," << icache_cpi(s, profile).level << "\n";
    if (c.format == "text") {
      io.out << "# plateaus:";
      for (auto b : bounds) io.out << " " << b / 1024 << "KiB";
      io.out << "\n";
    }
  }
  return kExitOk;
}

int run_aggressor(const Common& c, const std::string& aggressor, const std::string& victim,
                  const std::string& placement, int iterations, Context& io) {
  const auto profile = load_profile(c.arch);
  AggressorVictimSpec spec;
  spec.aggressor_bytes = parse_size(aggressor);
  spec.victim_bytes = parse_size(victim);
  spec.placement =
      placement == "different-sm" ? Placement::DifferentSm : Placement::SameSmDifferentBlock;
  spec.iterations = iterations;
  const auto r = run_aggressor_victim(spec, profile);
  if (c.format == "json") {
    io.out << json{{"arch", profile.name},
                   {"placement", placement},
                   {"aggressor_bytes", spec.aggressor_bytes},
                   {"victim_bytes", spec.victim_bytes},
                   {"aggressor_cpi", r.aggressor_cpi},
                   {"victim_cpi", r.victim_cpi},
                   {"aggressor_baseline_cpi", r.aggressor_baseline_cpi},
                   {"victim_baseline_cpi", r.victim_baseline_cpi}}
                  .dump(2)
           << "\n";
  } else {
    io.out << "role,cpi,baseline_cpi\n"
           << "aggressor," << r.aggressor_cpi << "," << r.aggressor_baseline_cpi << "\n"
           << "victim," << r.victim_cpi << "," << r.victim_baseline_cpi << "\n";
  }
  return kExitOk;
}

int run_shared(const Common& c, int degree, Context& io) {
  const auto profile = load_profile(c.arch);
  std::vector<std::pair<int, int>> rows;
  if (degree > 0)
    rows.emplace_back(degree, shared_latency(degree, profile));
  else
    for (int d = 1; d <= profile.shared.banks; ++d) rows.emplace_back(d, shared_latency(d, profile));
  const double bw = shared_bandwidth_bound(profile);
  if (c.format == "json") {
    json list = json::array();
    for (const auto& [d, l] : rows) list.push_back({{"degree", d}, {"cycles", l}});
    io.out << json{{"arch", profile.name}, {"latency", list}, {"bandwidth_bytes_per_s", bw}}
                  .dump(2)
           << "\n";
  } else {
    io.out << "degree,cycles\n";
    for (const auto& [d, l] : rows) io.out << d << "," << l << "\n";
    if (c.format == "text")
      io.out << "# bandwidth bound " << std::fixed << std::setprecision(0) << bw / 1e9
             << " GB/s\n";
  }
  return kExitOk;
}

int run_const(const Common& c, int count, const std::string& level, const std::string& aggressor,
              const std::string& victim, Context& io) {
  require_format(c, {"text", "json"});
  const auto profile = load_profile(c.arch);
  const int cycles = const_latency(count, level, profile);
  std::optional<double> miss;
  if (!aggressor.empty() || !victim.empty()) {
    if (aggressor.empty() || victim.empty())
      throw Error(ErrorCode::UsageError, "--aggressor-bytes and --victim-bytes go together");
    miss = const_icache_interaction(parse_size(aggressor), parse_size(victim), profile);
  }
  if (c.format == "json") {
    json j = {{"arch", profile.name}, {"level", level}, {"distinct_addresses", count},
              {"cycles", cycles}};
    if (miss) j["victim_miss_rate"] = *miss;
    io.out << j.dump(2) << "\n";
  } else {
    io.out << level << " x" << count << ": " << cycles << " cycles\n";
    if (miss) io.out << "victim miss rate: " << *miss << "\n";
  }
  return kExitOk;
}

int run_lint(const Common& c, const std::string& rules, Context& io) {
  require_format(c, {"text", "json"});
  const auto profile = load_profile(c.arch);
  const auto selected = resolve_rules(rules);
  const auto p = load_program(c, profile, io.in);
  const auto doc = lint(p, profile, selected);
  if (c.format == "json") {
    json list = json::array();
    for (const auto& f : doc.findings)
      list.push_back({{"rule", f.rule},
                      {"severity", std::string(to_string(f.severity))},
                      {"index", f.index},
                      {"address", f.address ? json(*f.address) : json(nullptr)},
                      {"message", f.message},
                      {"suggestion", f.suggestion ? json(*f.suggestion) : json(nullptr)}});
    io.out << json{{"arch", profile.name}, {"findings", list}, {"summary", doc.summary}}.dump(2)
           << "\n";
  } else {
    for (const auto& f : doc.findings) {
      io.out << address_text(f.address) << "  " << f.rule << " [" << to_string(f.severity)
             << "] " << f.message << "\n";
      if (f.suggestion) io.out << "      suggestion: " << *f.suggestion << "\n";
    }
    io.out << doc.findings.size() << " finding(s)\n";
  }
  return doc.findings.empty() ? kExitOk : kExitFindings;
}

int run_profiles_list(const Common& c, Context& io) {
  require_format(c, {"text", "json"});
  const auto names = builtin_profiles();
  if (c.format == "json")
    io.out << json{{"profiles", names}}.dump(2) << "\n";
  else
    for (const auto& n : names) io.out << n << "\n";
  return kExitOk;
}

int run_profiles_show(const Common& c, const std::string& name, Context& io) {
  require_format(c, {"text", "json"});
  io.out << profile_to_json_text(load_profile(name.empty() ? c.arch : name)) << "\n";
  return kExitOk;
}

int run_profiles_validate(const Common& c, const std::string& source, Context& io) {
  require_format(c, {"text", "json"});
  const auto p = load_profile(source);
  if (c.format == "json")
    io.out << json{{"profile", p.name}, {"valid", true}, {"violations", json::array()}}.dump(2)
           << "\n";
  else
    io.out << p.name << ": valid\n";
  return kExitOk;
}

void report(std::ostream& err, const Error& e) {
  json j = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
  if (const auto* pe = dynamic_cast<const ParseError*>(&e)) {
    j["line"] = pe->line();
    j["column"] = pe->column();
    j["expected"] = pe->expected();
  }
  err << j.dump() << "\n";
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"SASS analysis and GPU microarchitecture model toolkit", "sasskit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  std::map<CLI::App*, std::function<int(Context&)>> actions;
  std::vector<std::unique_ptr<Common>> commons;
  auto common = [&](CLI::App* sub, bool with_input) -> Common& {
    commons.push_back(std::make_unique<Common>());
    auto& c = *commons.back();
    c.arch = default_arch();
    add_common(sub, c, with_input);
    return c;
  };

  bool parse_controls = false;
  auto* parse = app.add_subcommand("parse", "parse a listing and print it canonically");
  auto& c_parse = common(parse, true);
  parse->add_flag("--controls", parse_controls, "decode control sections from hex words");
  actions[parse] = [&](Context& io) { return run_parse(c_parse, parse_controls, io); };

  std::vector<std::string> dec_values;
  bool dec_section = false, dec_bundle = false;
  auto* decode = app.add_subcommand("decode-ctl", "decode control words or sections");
  auto& c_decode = common(decode, false);
  decode->add_option("values", dec_values, "hex words")->required();
  decode->add_flag("--section", dec_section, "values are bare 21-bit sections");
  decode->add_flag("--bundle", dec_bundle, "values are whole bundles (control word first)");
  actions[decode] = [&](Context& io) {
    return run_decode(c_decode, dec_values, dec_section, dec_bundle, io);
  };

  EncodeArgs enc;
  auto* encode = app.add_subcommand("encode-ctl", "encode a control section or control word");
  auto& c_encode = common(encode, false);
  encode->add_option("--reuse", enc.reuse, "reuse flags, bit i = source slot i");
  encode->add_option("--wait", enc.wait, "barriers to wait on")->delimiter(',');
  encode->add_option("--read", enc.read, "read barrier (7 = none)");
  encode->add_option("--write", enc.write, "write barrier (7 = none)");
  encode->add_option("--yield", enc.yield, "yield bit");
  encode->add_option("--stall", enc.stall, "stall cycles");
  encode->add_option("sections", enc.sections, "raw sections to pack into one control word");
  actions[encode] = [&](Context& io) { return run_encode(c_encode, enc, io); };

  bool banks_reuse = false;
  auto* banks = app.add_subcommand("banks", "register bank conflict report");
  auto& c_banks = common(banks, true);
  banks->add_flag("--reuse", banks_reuse, "model the operand reuse cache");
  actions[banks] = [&](Context& io) { return run_banks(c_banks, banks_reuse, io); };

  int budget = 255;
  auto* reassign = app.add_subcommand("reassign", "rename registers to remove bank conflicts");
  auto& c_reassign = common(reassign, true);
  reassign->add_option("--budget", budget, "usable registers R0..R(budget-1)")
      ->capture_default_str();
  actions[reassign] = [&](Context& io) { return run_reassign(c_reassign, budget, io); };

  auto add_schedule_flags = [](CLI::App* sub, ScheduleArgs& a) {
    sub->add_option("--assume", a.assume, "latency class of global loads")
        ->check(CLI::IsMember({"l1hit", "l2hit", "l2miss", "tlbmiss"}))
        ->capture_default_str();
    sub->add_option("--read-hold", a.read_hold, "cycles a read barrier stays set")
        ->capture_default_str();
    sub->add_flag("--strict", a.strict, "fail on opcodes without a latency class");
    sub->add_flag("--no-conflicts", a.no_conflicts, "ignore register bank conflicts");
    sub->add_flag("--default-controls", a.default_controls,
                  "ignore control bits in hex words and synthesize them");
  };

  ScheduleArgs sched;
  auto* schedule = app.add_subcommand("schedule", "per-instruction issue timeline of one warp");
  auto& c_schedule = common(schedule, true);
  add_schedule_flags(schedule, sched);
  actions[schedule] = [&](Context& io) { return run_schedule(c_schedule, sched, io); };

  ScheduleArgs mw_sched;
  std::string warps = "0";
  int iterations = 1;
  auto* multiwarp = app.add_subcommand("multiwarp", "several warps sharing the SM's schedulers");
  auto& c_multi = common(multiwarp, true);
  add_schedule_flags(multiwarp, mw_sched);
  multiwarp->add_option("--warps", warps, "comma-separated warp ids")->capture_default_str();
  multiwarp->add_option("--iterations", iterations, "times each warp runs the listing")
      ->capture_default_str();
  actions[multiwarp] = [&](Context& io) {
    return run_multiwarp(c_multi, mw_sched, warps, iterations, io);
  };

  auto* memsim = app.add_subcommand("memsim", "memory hierarchy simulations");
  memsim->require_subcommand(1);

  PchaseArgs pc;
  auto* pchase = memsim->add_subcommand("pchase", "classify a pointer-chase trace");
  auto& c_pchase = common(pchase, false);
  pchase->add_option("--trace", pc.trace, "CSV trace: index,address[,kind[,sm]]");
  pchase->add_option("--array-bytes", pc.array_bytes, "generated scan size")->capture_default_str();
  pchase->add_option("--stride", pc.stride, "generated scan stride")->capture_default_str();
  pchase->add_option("--passes", pc.passes, "generated scan passes")->capture_default_str();
  pchase->add_option("--base", pc.base, "generated scan start address")->capture_default_str();
  pchase->add_flag("--detected-l1", pc.detected, "size the L1 by its detectable capacity");
  actions[pchase] = [&](Context& io) { return run_pchase(c_pchase, pc, io); };

  std::string sweep_max;
  auto* sweep = memsim->add_subcommand("icache-sweep", "CPI versus code size");
  auto& c_sweep = common(sweep, false);
  sweep->add_option("--max-bytes", sweep_max, "largest code size (default: 2x last level)");
  actions[sweep] = [&](Context& io) { return run_icache_sweep(c_sweep, sweep_max, io); };

  std::string av_aggr = "64KiB", av_victim = "8KiB", av_place = "same-sm";
  int av_iters = 4;
  auto* av = memsim->add_subcommand("aggressor-victim", "instruction cache sharing experiment");
  auto& c_av = common(av, false);
  av->add_option("--aggressor", av_aggr, "aggressor code size")->capture_default_str();
  av->add_option("--victim", av_victim, "victim code size")->capture_default_str();
  av->add_option("--placement", av_place, "where the aggressor runs")
      ->check(CLI::IsMember({"same-sm", "different-sm"}))
      ->capture_default_str();
  av->add_option("--iterations", av_iters, "measured iterations")->capture_default_str();
  actions[av] = [&](Context& io) {
    return run_aggressor(c_av, av_aggr, av_victim, av_place, av_iters, io);
  };

  int degree = 0;
  auto* shared = memsim->add_subcommand("shared", "shared memory latency and bandwidth bound");
  auto& c_shared = common(shared, false);
  shared->add_option("--degree", degree, "bank conflict degree (default: every degree)");
  actions[shared] = [&](Context& io) { return run_shared(c_shared, degree, io); };

  int const_count = 1;
  std::string const_level = "L1", const_aggr, const_victim;
  auto* cst = memsim->add_subcommand("const", "constant cache latency and icache interaction");
  auto& c_const = common(cst, false);
  cst->add_option("--count", const_count, "distinct addresses in the warp")->capture_default_str();
  cst->add_option("--level", const_level, "L1, L1.5 or L2")->capture_default_str();
  cst->add_option("--aggressor-bytes", const_aggr, "instruction bytes streamed by an aggressor");
  cst->add_option("--victim-bytes", const_victim, "constant bytes held by the victim");
  actions[cst] = [&](Context& io) {
    return run_const(c_const, const_count, const_level, const_aggr, const_victim, io);
  };

  std::string rules;
  auto* lint_cmd = app.add_subcommand("lint", "static performance diagnostics");
  auto& c_lint = common(lint_cmd, true);
  lint_cmd->add_option("--rules", rules, "rule ids or letters a-d, comma separated");
  actions[lint_cmd] = [&](Context& io) { return run_lint(c_lint, rules, io); };

  auto* profiles = app.add_subcommand("profiles", "architecture profiles");
  profiles->require_subcommand(1);
  auto* plist = profiles->add_subcommand("list", "built-in profile names");
  auto& c_plist = common(plist, false);
  actions[plist] = [&](Context& io) { return run_profiles_list(c_plist, io); };
  std::string show_name;
  auto* pshow = profiles->add_subcommand("show", "print a profile as JSON");
  auto& c_pshow = common(pshow, false);
  pshow->add_option("name", show_name, "profile name or file (default: --arch)");
  actions[pshow] = [&](Context& io) { return run_profiles_show(c_pshow, show_name, io); };
  std::string validate_src;
  auto* pval = profiles->add_subcommand("validate", "load and check a profile");
  auto& c_pval = common(pval, false);
  pval->add_option("source", validate_src, "profile name or JSON file")->required();
  actions[pval] = [&](Context& io) { return run_profiles_validate(c_pval, validate_src, io); };

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", "UsageError"}, {"message", e.what()}}.dump() << "\n";
    err << app.help();
    return kExitUsage;
  }

  Context io{in, out};
  try {
    for (auto& [sub, action] : actions)
      if (sub->parsed()) return action(io);
    err << json{{"error", "UsageError"}, {"message", "no subcommand"}}.dump() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    report(err, e);
    return e.code() == ErrorCode::UsageError ? kExitUsage : kExitInput;
  }
}

}  // namespace sasskit::cli
