#include <algorithm>
#include <array>
#include <cstdio>

#include "sasskit/error.hpp"
#include "sasskit/sass.hpp"

namespace sasskit {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool one_of(std::string_view s, std::initializer_list<std::string_view> set) {
  return std::find(set.begin(), set.end(), s) != set.end();
}

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string signed_hex(std::int64_t v) {
  return v < 0 ? "-" + hex(static_cast<std::uint64_t>(-v)) : hex(static_cast<std::uint64_t>(v));
}

std::string word_comment(std::uint64_t w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "/* 0x%016llx */", static_cast<unsigned long long>(w));
  return buf;
}

std::string predicate_name(int index, bool uniform) {
  std::string s = uniform ? "UP" : "P";
  return s + (index == kPT ? std::string("T") : std::to_string(index));
}

int sm_of(Generation g) {
  switch (g) {
    case Generation::Kepler: return 35;
    case Generation::Maxwell: return 52;
    case Generation::Pascal: return 61;
    case Generation::Volta: return 70;
    case Generation::Turing: return 75;
  }
  return 75;
}

bool is_double_op(std::string_view op) {
  return one_of(op, {"DADD", "DMUL", "DFMA", "DMNMX", "DSET", "DSETP", "DMMA"});
}

// First operand index that is read rather than written.
std::size_t first_source(const Instruction& in) {
  const auto dst = destination_operand(in);
  if (!dst) return 0;
  std::size_t i = *dst + 1;
  // xSETP-style ops write one or two predicates.
  if (std::holds_alternative<PredicateReg>(in.operands[*dst].value))
    while (i < in.operands.size() &&
           std::holds_alternative<PredicateReg>(in.operands[i].value) && i < 2)
      ++i;
  return i;
}

}  // namespace

bool Operand::has_attribute(std::string_view a) const {
  return std::find(attributes.begin(), attributes.end(), a) != attributes.end();
}

bool Instruction::has_modifier(std::string_view m) const {
  return std::find(modifiers.begin(), modifiers.end(), m) != modifiers.end();
}

std::vector<std::uint64_t> Program::words() const {
  std::vector<std::uint64_t> out;
  for (const auto& in : instructions) {
    out.insert(out.end(), in.leading_words.begin(), in.leading_words.end());
    out.insert(out.end(), in.raw_words.begin(), in.raw_words.end());
  }
  out.insert(out.end(), trailing_words.begin(), trailing_words.end());
  return out;
}

std::string render_operand(const Operand& op) {
  std::string s;
  if (op.negated) s += '-';
  if (op.inverted)
    s += std::holds_alternative<PredicateReg>(op.value) ? '!' : '~';
  if (op.absolute) s += '|';
  s += std::visit(
      overloaded{
          [](const GeneralReg& r) {
            return r.is_zero() ? std::string("RZ") : "R" + std::to_string(r.index);
          },
          [](const UniformReg& r) {
            return r.is_zero() ? std::string("URZ") : "UR" + std::to_string(r.index);
          },
          [](const PredicateReg& p) { return predicate_name(p.index, p.uniform); },
          [](const ConstRef& c) {
            return "c[" + hex(c.bank) + "][" + signed_hex(c.offset) + "]";
          },
          [](const MemRef& m) {
            std::string t = "[";
            bool any = false;
            if (!m.base.is_zero() || (!m.uniform_offset && m.offset == 0) ||
                !m.base_attributes.empty()) {
              t += m.base.is_zero() ? "RZ" : "R" + std::to_string(m.base.index);
              for (const auto& a : m.base_attributes) t += "." + a;
              any = true;
            }
            if (m.uniform_offset) {
              if (any) t += '+';
              t += m.uniform_offset->is_zero()
                       ? std::string("URZ")
                       : "UR" + std::to_string(m.uniform_offset->index);
              any = true;
            }
            if (m.offset != 0) {
              if (any && m.offset > 0) t += '+';
              t += signed_hex(m.offset);
            }
            return t + "]";
          },
          [](const Immediate& i) {
            return i.text.empty() ? signed_hex(i.integer) : i.text;
          },
          [](const Symbol& y) { return y.text; },
      },
      op.value);
  for (const auto& a : op.attributes) s += "." + a;
  if (op.absolute) s += '|';
  return s;
}

std::string render_instruction(const Instruction& in) {
  std::string s;
  if (in.address) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "/*%04llx*/ ", static_cast<unsigned long long>(*in.address));
    s += buf;
  }
  if (in.predicate)
    s += "@" + std::string(in.predicate->negated ? "!" : "") +
         predicate_name(in.predicate->index, in.predicate->uniform) + " ";
  s += in.opcode;
  for (const auto& m : in.modifiers) s += "." + m;
  for (std::size_t i = 0; i < in.operands.size(); ++i)
    s += (i == 0 ? " " : ", ") + render_operand(in.operands[i]);
  s += " ;";
  return s;
}

std::string render_program(const Program& p) {
  std::string out;
  const std::string pad(8, ' ');
  const bool embedded = p.arch && has_embedded_controls(*p.arch);
  if (p.arch && !p.instructions.empty()) {
    const auto sm = std::to_string(sm_of(*p.arch));
    out += pad + ".headerflags @\"EF_CUDA_SM" + sm + " EF_CUDA_PTX_SM(EF_CUDA_SM" + sm +
           ")\"\n";
  }
  for (const auto& in : p.instructions) {
    for (auto w : in.leading_words) out += pad + word_comment(w) + "\n";
    out += pad + render_instruction(in);
    if (embedded) {
      for (std::size_t k = 0; k < in.raw_words.size(); ++k)
        out += (k == 0 ? " " : "\n" + pad) + word_comment(in.raw_words[k]);
    } else {
      for (auto w : in.raw_words) out += " " + word_comment(w);
    }
    out += "\n";
  }
  for (auto w : p.trailing_words) out += pad + word_comment(w) + "\n";
  return out;
}

void attach_controls(Program& p, const ControlLayout& layout) {
  if (layout.generation == Generation::Kepler)
    throw Error(ErrorCode::MalformedControls,
                "Kepler control sections are opaque and carry no scheduling fields");
  std::vector<ControlInfo> out;
  if (has_embedded_controls(layout.generation)) {
    for (std::size_t i = 0; i < p.instructions.size(); ++i) {
      const auto& w = p.instructions[i].raw_words;
      if (w.size() != 2)
        throw Error(ErrorCode::MalformedControls,
                    "instruction " + std::to_string(i) + " has " + std::to_string(w.size()) +
                        " hex words, expected 2");
      out.push_back(*extract_controls(w, layout).front().info);
    }
  } else {
    const auto words = p.words();
    const auto sections = extract_controls(words, layout);
    if (sections.size() != p.instructions.size())
      throw Error(ErrorCode::MalformedControls,
                  std::to_string(sections.size()) + " control sections for " +
                      std::to_string(p.instructions.size()) + " instructions");
    for (const auto& s : sections) out.push_back(*s.info);
  }
  p.controls = std::move(out);
}

bool is_memory_access(const Instruction& in) {
  return one_of(in.opcode, {"LDG", "STG", "LDS", "STS", "LD", "ST", "LDL", "STL"});
}

bool is_store(const Instruction& in) {
  return one_of(in.opcode, {"STG", "STS", "ST", "STL", "RED"});
}

bool is_branch(const Instruction& in) {
  return one_of(in.opcode, {"BRA", "BRX", "JMP", "JMX", "CALL", "RET", "EXIT", "BRK", "CONT",
                            "SYNC", "SSY", "PBK", "PCNT", "BSYNC", "BSSY", "KILL"});
}

int access_width(const Instruction& in) {
  if (!is_memory_access(in))
    throw Error(ErrorCode::NotAMemoryAccess, in.opcode + " is not a memory access");
  for (const auto& m : in.modifiers) {
    if (m == "128") return 128;
    if (m == "64") return 64;
    if (m == "32") return 32;
    if (m == "U16" || m == "S16" || m == "16") return 16;
    if (m == "U8" || m == "S8" || m == "8") return 8;
  }
  return 32;
}

std::optional<std::size_t> destination_operand(const Instruction& in) {
  if (in.operands.empty() || is_store(in) || is_branch(in)) return std::nullopt;
  if (one_of(in.opcode, {"BAR", "DEPBAR", "NOP", "MEMBAR", "WARPSYNC", "CCTL", "ERRBAR"}))
    return std::nullopt;
  return 0;
}

int operand_register_count(const Instruction& in, std::size_t idx) {
  if (idx >= in.operands.size()) return 1;
  const auto& v = in.operands[idx].value;
  if (!std::holds_alternative<GeneralReg>(v)) return 1;
  if (is_memory_access(in)) return std::max(1, access_width(in) / 32);
  if (is_double_op(in.opcode)) return 2;
  if (in.opcode == "HMMA") {
    if (in.has_modifier("1688")) return idx == 0 || idx == 3 ? 4 : idx == 1 ? 2 : 1;
    return 2;
  }
  if (in.opcode == "IMAD" && in.has_modifier("WIDE")) return idx == 0 || idx == 3 ? 2 : 1;
  return 1;
}

std::vector<RegisterUse> destination_registers(const Instruction& in) {
  std::vector<RegisterUse> out;
  const auto dst = destination_operand(in);
  if (!dst) return out;
  if (const auto* r = std::get_if<GeneralReg>(&in.operands[*dst].value); r && !r->is_zero())
    out.push_back({static_cast<int>(*dst), -1, r->index,
                   operand_register_count(in, *dst), false});
  return out;
}

std::vector<RegisterUse> source_registers(const Instruction& in) {
  std::vector<RegisterUse> out;
  const auto begin = first_source(in);
  for (std::size_t i = begin; i < in.operands.size(); ++i) {
    const int slot = static_cast<int>(i - begin);
    const auto& v = in.operands[i].value;
    if (const auto* r = std::get_if<GeneralReg>(&v); r && !r->is_zero()) {
      out.push_back({static_cast<int>(i), slot, r->index, operand_register_count(in, i), false});
    } else if (const auto* m = std::get_if<MemRef>(&v); m && !m->base.is_zero()) {
      const bool wide = in.has_modifier("E") ||
                        std::find(m->base_attributes.begin(), m->base_attributes.end(),
                                  "64") != m->base_attributes.end();
      out.push_back({static_cast<int>(i), slot, m->base.index, wide ? 2 : 1, true});
    }
  }
  return out;
}

}  // namespace sasskit
