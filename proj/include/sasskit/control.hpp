#pragma once

// Scheduling control information: the 21-bit control section shared by
// Maxwell, Pascal, Volta and Turing, and the bundle/embedding layouts that
// place sections in the instruction stream on each generation.
//
// Section layout, most significant bit first:
//
//   20..17  reuse flags      bit 17 = first source operand
//   16..11  wait barrier mask
//   10..8   read barrier     7 = none
//    7..5   write barrier    7 = none
//    4      yield flag
//    3..0   stall cycles

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sasskit/profile.hpp"

namespace sasskit {

inline constexpr int kSectionBits = 21;
inline constexpr std::uint32_t kSectionMask = (1u << kSectionBits) - 1;
inline constexpr int kNumBarriers = 6;
inline constexpr int kNoBarrier = 7;
inline constexpr int kMaxStall = 15;

struct ControlInfo {
  std::uint8_t reuse = 0;      // 4 bits, bit i = source operand slot i
  std::uint8_t wait_mask = 0;  // 6 bits, bit b = barrier b
  std::uint8_t read_barrier = kNoBarrier;
  std::uint8_t write_barrier = kNoBarrier;
  bool yield = true;
  std::uint8_t stall = 1;

  bool reuses(int slot) const { return (reuse >> slot) & 1u; }
  bool waits_on(int barrier) const { return (wait_mask >> barrier) & 1u; }
  bool has_read_barrier() const { return read_barrier != kNoBarrier; }
  bool has_write_barrier() const { return write_barrier != kNoBarrier; }

  bool operator==(const ControlInfo&) const = default;
};

ControlInfo decode_control_section(std::uint32_t bits);
std::uint32_t encode_control_section(const ControlInfo& info);

enum class BundleOrder { LowestFirst, HighestFirst };

struct ControlLayout {
  Generation generation = Generation::Turing;
  int words_per_unit = 2;     // 128-bit pair, or bundle size incl. control word
  int section_count = 1;      // sections per control unit
  int section_width = kSectionBits;
  std::vector<int> section_bit_offsets;  // bit positions within the unit
  std::vector<int> zero_pad_positions;   // bits that must read 0
  BundleOrder order = BundleOrder::LowestFirst;

  int instructions_per_unit() const {
    return has_embedded_controls(generation) ? 1 : words_per_unit - 1;
  }
};

/// Default layout; `embedded_offset` only applies to Volta/Turing.
ControlLayout default_layout(Generation g, int embedded_offset = 105,
                             BundleOrder order = BundleOrder::LowestFirst);

/// One control section as found in the stream. Kepler sections are opaque
/// 8-bit values and carry no decoded fields.
struct ControlSection {
  std::uint32_t raw = 0;
  std::optional<ControlInfo> info;

  bool operator==(const ControlSection&) const = default;
};

/// Sections of one pre-Volta control word in instruction order.
std::vector<ControlSection> decode_control_word(std::uint64_t word,
                                                const ControlLayout& layout);
std::uint64_t encode_control_word(std::span<const ControlSection> sections,
                                  const ControlLayout& layout);

std::vector<ControlSection> extract_controls(std::span<const std::uint64_t> words,
                                             const ControlLayout& layout);
std::vector<std::uint64_t> inject_controls(std::span<const std::uint64_t> words,
                                           std::span<const ControlSection> controls,
                                           const ControlLayout& layout);

/// Bit mask of every control position (sections and padding) in one unit.
std::vector<std::uint64_t> control_bit_mask(const ControlLayout& layout);

}  // namespace sasskit
