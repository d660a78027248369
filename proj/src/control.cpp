#include "sasskit/control.hpp"

#include <string>

#include "sasskit/error.hpp"

namespace sasskit {
namespace {

constexpr int kStallShift = 0;
constexpr int kYieldShift = 4;
constexpr int kWriteShift = 5;
constexpr int kReadShift = 8;
constexpr int kWaitShift = 11;
constexpr int kReuseShift = 17;

constexpr int kKeplerSectionBits = 8;

bool get_bit(std::span<const std::uint64_t> unit, int pos) {
  return (unit[static_cast<std::size_t>(pos / 64)] >> (pos % 64)) & 1u;
}

void set_bit(std::span<std::uint64_t> unit, int pos, bool value) {
  auto& w = unit[static_cast<std::size_t>(pos / 64)];
  const std::uint64_t m = std::uint64_t{1} << (pos % 64);
  w = value ? (w | m) : (w & ~m);
}

std::uint32_t read_field(std::span<const std::uint64_t> unit, int offset,
                         int width) {
  std::uint32_t v = 0;
  for (int b = 0; b < width; ++b)
    v |= static_cast<std::uint32_t>(get_bit(unit, offset + b)) << b;
  return v;
}

void write_field(std::span<std::uint64_t> unit, int offset, int width,
                 std::uint32_t value) {
  for (int b = 0; b < width; ++b) set_bit(unit, offset + b, (value >> b) & 1u);
}

// Bit offset of the section feeding the i-th instruction of a unit.
int section_offset(const ControlLayout& layout, int i) {
  const int n = layout.section_count;
  const int k = layout.order == BundleOrder::LowestFirst ? i : n - 1 - i;
  return layout.section_bit_offsets.at(static_cast<std::size_t>(k));
}

void check_padding(std::span<const std::uint64_t> unit,
                   const ControlLayout& layout, std::size_t unit_index) {
  for (int pos : layout.zero_pad_positions)
    if (get_bit(unit, pos))
      throw Error(ErrorCode::BadPadding,
                  "control unit " + std::to_string(unit_index) + ": bit " +
                      std::to_string(pos) + " must be zero");
}

void check_length(std::size_t words, const ControlLayout& layout) {
  const auto per = static_cast<std::size_t>(layout.words_per_unit);
  if (words % per != 0)
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(words) + " words is not a multiple of " +
                    std::to_string(per) + " on " +
                    std::string(to_string(layout.generation)));
}

ControlSection make_section(std::uint32_t raw, const ControlLayout& layout) {
  ControlSection s{raw, std::nullopt};
  if (layout.generation != Generation::Kepler) s.info = decode_control_section(raw);
  return s;
}

}  // namespace

ControlInfo decode_control_section(std::uint32_t bits) {
  if (bits > kSectionMask)
    throw Error(ErrorCode::ValueOutOfRange,
                "control section value exceeds 21 bits");
  ControlInfo c;
  c.stall = static_cast<std::uint8_t>((bits >> kStallShift) & 0xF);
  c.yield = ((bits >> kYieldShift) & 1u) != 0;
  c.write_barrier = static_cast<std::uint8_t>((bits >> kWriteShift) & 0x7);
  c.read_barrier = static_cast<std::uint8_t>((bits >> kReadShift) & 0x7);
  c.wait_mask = static_cast<std::uint8_t>((bits >> kWaitShift) & 0x3F);
  c.reuse = static_cast<std::uint8_t>((bits >> kReuseShift) & 0xF);
  return c;
}

std::uint32_t encode_control_section(const ControlInfo& c) {
  if (c.stall > kMaxStall)
    throw Error(ErrorCode::InvalidField, "stall " + std::to_string(c.stall) + " > 15");
  if (c.wait_mask > 0x3F)
    throw Error(ErrorCode::InvalidField, "wait mask names a barrier above 5");
  if (c.read_barrier > 7 || c.write_barrier > 7)
    throw Error(ErrorCode::InvalidField, "barrier index above 7");
  if (c.reuse > 0xF) throw Error(ErrorCode::InvalidField, "reuse flags exceed 4 bits");
  return (std::uint32_t{c.reuse} << kReuseShift) |
         (std::uint32_t{c.wait_mask} << kWaitShift) |
         (std::uint32_t{c.read_barrier} << kReadShift) |
         (std::uint32_t{c.write_barrier} << kWriteShift) |
         (std::uint32_t{c.yield} << kYieldShift) |
         (std::uint32_t{c.stall} << kStallShift);
}

ControlLayout default_layout(Generation g, int embedded_offset, BundleOrder order) {
  ControlLayout l;
  l.generation = g;
  l.order = order;
  switch (g) {
    case Generation::Turing:
    case Generation::Volta:
      if (embedded_offset < 0 || embedded_offset + kSectionBits + 2 > 128)
        throw Error(ErrorCode::InvalidField,
                    "control offset " + std::to_string(embedded_offset) +
                        " leaves no room for the section and its padding");
      l.words_per_unit = 2;
      l.section_count = 1;
      l.section_width = kSectionBits;
      l.section_bit_offsets = {embedded_offset};
      l.zero_pad_positions = {embedded_offset + kSectionBits,
                              embedded_offset + kSectionBits + 1};
      break;
    case Generation::Pascal:
    case Generation::Maxwell:
      l.words_per_unit = 4;
      l.section_count = 3;
      l.section_width = kSectionBits;
      l.section_bit_offsets = {0, 21, 42};
      l.zero_pad_positions = {63};
      break;
    case Generation::Kepler:
      l.words_per_unit = 8;
      l.section_count = 7;
      l.section_width = kKeplerSectionBits;
      for (int i = 0; i < 7; ++i) l.section_bit_offsets.push_back(2 + 8 * i);
      l.zero_pad_positions = {0, 1, 58, 59, 60, 61, 62, 63};
      break;
  }
  return l;
}

std::vector<ControlSection> decode_control_word(std::uint64_t word,
                                                const ControlLayout& layout) {
  if (has_embedded_controls(layout.generation))
    throw Error(ErrorCode::InvalidField,
                "Volta/Turing have no separate control words");
  const std::uint64_t unit[1] = {word};
  check_padding(unit, layout, 0);
  std::vector<ControlSection> out;
  for (int i = 0; i < layout.section_count; ++i)
    out.push_back(make_section(
        read_field(unit, section_offset(layout, i), layout.section_width), layout));
  return out;
}

std::uint64_t encode_control_word(std::span<const ControlSection> sections,
                                  const ControlLayout& layout) {
  if (has_embedded_controls(layout.generation))
    throw Error(ErrorCode::InvalidField,
                "Volta/Turing have no separate control words");
  if (sections.size() != static_cast<std::size_t>(layout.section_count))
    throw Error(ErrorCode::LengthMismatch,
                "expected " + std::to_string(layout.section_count) + " sections");
  std::uint64_t unit[1] = {0};
  for (int i = 0; i < layout.section_count; ++i) {
    const auto raw = sections[static_cast<std::size_t>(i)].raw;
    if (raw >> layout.section_width)
      throw Error(ErrorCode::ValueOutOfRange, "section value too wide");
    write_field(unit, section_offset(layout, i), layout.section_width, raw);
  }
  return unit[0];
}

std::vector<ControlSection> extract_controls(std::span<const std::uint64_t> words,
                                             const ControlLayout& layout) {
  check_length(words.size(), layout);
  const auto per = static_cast<std::size_t>(layout.words_per_unit);
  std::vector<ControlSection> out;
  for (std::size_t u = 0; u < words.size() / per; ++u) {
    auto unit = words.subspan(u * per, per);
    check_padding(unit, layout, u);
    for (int i = 0; i < layout.instructions_per_unit(); ++i)
      out.push_back(make_section(
          read_field(unit, section_offset(layout, i), layout.section_width), layout));
  }
  return out;
}

std::vector<std::uint64_t> inject_controls(std::span<const std::uint64_t> words,
                                           std::span<const ControlSection> controls,
                                           const ControlLayout& layout) {
  check_length(words.size(), layout);
  const auto per = static_cast<std::size_t>(layout.words_per_unit);
  const auto units = words.size() / per;
  const auto per_unit = static_cast<std::size_t>(layout.instructions_per_unit());
  if (controls.size() != units * per_unit)
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(controls.size()) + " controls for " +
                    std::to_string(units * per_unit) + " instructions");
  std::vector<std::uint64_t> out(words.begin(), words.end());
  for (std::size_t u = 0; u < units; ++u) {
    std::span<std::uint64_t> unit(out.data() + u * per, per);
    check_padding(unit, layout, u);
    for (std::size_t i = 0; i < per_unit; ++i) {
      const auto raw = controls[u * per_unit + i].raw;
      if (raw >> layout.section_width)
        throw Error(ErrorCode::ValueOutOfRange, "section value too wide");
      write_field(unit, section_offset(layout, static_cast<int>(i)),
                  layout.section_width, raw);
    }
  }
  return out;
}

std::vector<std::uint64_t> control_bit_mask(const ControlLayout& layout) {
  std::vector<std::uint64_t> mask(static_cast<std::size_t>(layout.words_per_unit), 0);
  for (int off : layout.section_bit_offsets)
    for (int b = 0; b < layout.section_width; ++b) set_bit(mask, off + b, true);
  for (int pos : layout.zero_pad_positions) set_bit(mask, pos, true);
  return mask;
}

}  // namespace sasskit
