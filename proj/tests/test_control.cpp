#include "doctest.h"

#include <random>

#include "sasskit/control.hpp"
#include "sasskit/error.hpp"

using namespace sasskit;

TEST_CASE("section fields") {
  const auto c = decode_control_section(0x3e2);
  CHECK(c.stall == 2);
  CHECK_FALSE(c.yield);
  CHECK(c.write_barrier == 7);
  CHECK(c.read_barrier == 3);
  CHECK(c.wait_mask == 0);
  CHECK(c.reuse == 0);
  CHECK(encode_control_section(c) == 0x3e2);

  ControlInfo w;
  w.reuse = 0b0001;
  w.wait_mask = 0b100001;
  CHECK((encode_control_section(w) >> 17) == 1u);
  CHECK(((encode_control_section(w) >> 11) & 0x3f) == 0b100001);
}

TEST_CASE("Pascal word") {
  const auto layout = default_layout(Generation::Pascal);
  const auto s = decode_control_word(0x000f8800fe2007f1, layout);
  REQUIRE(s.size() == 3);
  CHECK(s[0].raw == 0x7f1);
  CHECK(s[1].raw == 0x7f1);
  CHECK(s[2].raw == 0x3e2);
  CHECK(encode_control_word(s, layout) == 0x000f8800fe2007f1);

  const auto rev = decode_control_word(0x000f8800fe2007f1,
                                       default_layout(Generation::Pascal, 105,
                                                      BundleOrder::HighestFirst));
  CHECK(rev[0].raw == 0x3e2);
}

TEST_CASE("padding bit rejected") {
  const auto layout = default_layout(Generation::Maxwell);
  try {
    decode_control_word(1ull << 63, layout);
    FAIL("expected BadPadding");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadPadding);
  }
}

TEST_CASE("Kepler sections are opaque bytes") {
  const auto layout = default_layout(Generation::Kepler);
  CHECK(layout.words_per_unit == 8);
  std::vector<ControlSection> secs;
  for (int i = 0; i < 7; ++i) secs.push_back({static_cast<std::uint32_t>(0x20 + i), {}});
  const auto w = encode_control_word(secs, layout);
  CHECK((w & 3) == 0);
  CHECK((w >> 58) == 0);
  CHECK(decode_control_word(w, layout) == secs);
}

TEST_CASE("Turing embedded offset") {
  const auto layout = default_layout(Generation::Turing);
  const std::vector<std::uint64_t> words = {0x0000000000000000, 0x000fd00000000f00};
  const auto s = extract_controls(words, layout);
  REQUIRE(s.size() == 1);
  CHECK(s[0].raw == (0x000fd00000000f00ull >> 41));
  CHECK(s[0].info->stall == 8);
}

TEST_CASE("inject inverts extract on random streams") {
  std::mt19937_64 rng(7);
  for (auto g : {Generation::Maxwell, Generation::Pascal, Generation::Volta, Generation::Turing,
                 Generation::Kepler}) {
    const auto layout = default_layout(g);
    const auto mask = control_bit_mask(layout);
    std::vector<std::uint64_t> words(layout.words_per_unit * 5);
    for (std::size_t i = 0; i < words.size(); ++i) {
      auto m = mask[i % mask.size()];
      words[i] = rng() & ~m;
    }
    std::vector<ControlSection> secs;
    const auto n = 5 * layout.section_count;
    for (int i = 0; i < n; ++i) {
      const std::uint32_t raw = static_cast<std::uint32_t>(rng()) &
                                ((1u << layout.section_width) - 1);
      secs.push_back({raw, g == Generation::Kepler
                               ? std::nullopt
                               : std::optional(decode_control_section(raw))});
    }
    const auto injected = inject_controls(words, secs, layout);
    CHECK(extract_controls(injected, layout) == secs);
    CHECK(inject_controls(injected, extract_controls(injected, layout), layout) == injected);
  }
}

TEST_CASE("length mismatch") {
  const auto layout = default_layout(Generation::Pascal);
  const std::vector<std::uint64_t> words(3);
  CHECK_THROWS_AS(extract_controls(words, layout), Error);
}
