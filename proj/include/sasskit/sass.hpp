#pragma once

// Typed representation of SASS disassembly listings (cuobjdump / nvdisasm
// text) with a parser and a canonical renderer.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sasskit/control.hpp"
#include "sasskit/profile.hpp"

namespace sasskit {

/// Index 255 is RZ / 63 is URZ / 7 is PT, mirroring the hardware encodings.
inline constexpr int kRZ = 255;
inline constexpr int kURZ = 63;
inline constexpr int kPT = 7;

struct GeneralReg {
  int index = 0;
  bool is_zero() const { return index == kRZ; }
  bool operator==(const GeneralReg&) const = default;
};

struct UniformReg {
  int index = 0;
  bool is_zero() const { return index == kURZ; }
  bool operator==(const UniformReg&) const = default;
};

struct PredicateReg {
  int index = 0;  // 0..6, kPT for PT
  bool uniform = false;
  bool operator==(const PredicateReg&) const = default;
};

struct ConstRef {
  std::uint32_t bank = 0;
  std::int64_t offset = 0;
  bool operator==(const ConstRef&) const = default;
};

struct MemRef {
  GeneralReg base{kRZ};
  std::vector<std::string> base_attributes;  // e.g. "64" in [R2.64]
  std::optional<UniformReg> uniform_offset;  // [R2+UR4]
  std::int64_t offset = 0;
  bool operator==(const MemRef&) const = default;
};

struct Immediate {
  bool is_float = false;
  std::int64_t integer = 0;
  double real = 0.0;
  std::string text;  // source spelling, reused when rendering
  bool operator==(const Immediate& o) const {
    return is_float == o.is_float && integer == o.integer &&
           (is_float ? text == o.text : true);
  }
};

/// Any other token: special registers (SR_TID.X), labels, barrier names.
struct Symbol {
  std::string text;
  bool operator==(const Symbol&) const = default;
};

using OperandValue = std::variant<GeneralReg, UniformReg, PredicateReg,
                                  ConstRef, MemRef, Immediate, Symbol>;

struct Operand {
  OperandValue value;
  // Dot-suffixes such as "reuse" or "COL", in source order.
  std::vector<std::string> attributes;
  bool negated = false;  // leading '-'
  bool inverted = false; // leading '!' or '~'
  bool absolute = false; // |x|

  bool has_attribute(std::string_view a) const;
  bool operator==(const Operand&) const = default;
};

struct Predicate {
  bool negated = false;
  int index = 0;  // 0..6 or kPT
  bool uniform = false;
  bool operator==(const Predicate&) const = default;
};

struct Instruction {
  std::optional<std::uint64_t> address;
  std::optional<Predicate> predicate;
  std::string opcode;
  std::vector<std::string> modifiers;
  std::vector<Operand> operands;
  // Bare hex words printed on their own lines ahead of this instruction
  // (pre-Volta bundle control words).
  std::vector<std::uint64_t> leading_words;
  // Hex words belonging to the instruction itself.
  std::vector<std::uint64_t> raw_words;

  bool has_modifier(std::string_view m) const;
  bool operator==(const Instruction&) const = default;
};

struct Program {
  std::optional<Generation> arch;
  std::vector<Instruction> instructions;
  std::optional<std::vector<ControlInfo>> controls;
  // Bare hex words after the last instruction.
  std::vector<std::uint64_t> trailing_words;

  bool operator==(const Program&) const = default;
  /// All hex words in listing order.
  std::vector<std::uint64_t> words() const;
};

struct ParseOptions {
  std::optional<Generation> arch;  // overrides .headerflags detection
};

Program parse_listing(std::string_view text, const ParseOptions& options = {});
Instruction parse_instruction(std::string_view line);

/// Decodes the control sections carried in the program's hex words into
/// `program.controls`, one per instruction. Requires `program.arch`.
void attach_controls(Program& program, const ControlLayout& layout);

std::string render_instruction(const Instruction& instr);
std::string render_operand(const Operand& op);
std::string render_program(const Program& program);

/// Width in bits of a global/local/shared memory access.
int access_width(const Instruction& instr);
bool is_memory_access(const Instruction& instr);
bool is_store(const Instruction& instr);
bool is_branch(const Instruction& instr);

/// A numbered general register range touched by one operand.
struct RegisterUse {
  int operand_index = 0;
  int slot = -1;   // source slot (0-based), -1 for destinations
  int base = 0;    // first register
  int count = 1;   // consecutive registers (2 for 64-bit, 4 for 128-bit,
                   // 2 for a 64-bit address under .E)
  bool from_memref = false;
};

/// Index of the destination operand, or nullopt for stores/branches.
std::optional<std::size_t> destination_operand(const Instruction& instr);
std::vector<RegisterUse> destination_registers(const Instruction& instr);
/// Source registers with their operand slot; RZ is excluded.
std::vector<RegisterUse> source_registers(const Instruction& instr);
/// Registers per operand for wide operations (1, 2 or 4).
int operand_register_count(const Instruction& instr, std::size_t operand_index);

}  // namespace sasskit
