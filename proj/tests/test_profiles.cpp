#include "doctest.h"

#include "sasskit/error.hpp"
#include "sasskit/profile.hpp"

using namespace sasskit;

TEST_CASE("six built-in profiles") {
  const auto names = builtin_profiles();
  CHECK(names.size() == 6);
  for (const auto& n : names) CHECK(validate_profile(builtin_profile(n)).empty());
}

TEST_CASE("T4 values") {
  const auto t4 = builtin_profile("t4");
  CHECK(t4.generation == Generation::Turing);
  CHECK(t4.sm_count == 40);
  CHECK(t4.graphics_clock_mhz == 1590);
  CHECK(t4.register_banks == 2);
  CHECK(t4.bank_width_bits == 64);
  CHECK(t4.latency("L1-hit")->cycles == 32);
  CHECK(t4.latency("L2-hit")->cycles == 188);
  CHECK(t4.latency("L2-miss-TLB-hit")->cycles == 296);
  CHECK(t4.latency("TLB-miss")->cycles == 616);
  CHECK(t4.latency("DFMA")->approximate);
  CHECK(t4.class_of("FFMA") == "core-ALU");
  CHECK(t4.class_of("HADD2") == "half");
  CHECK(t4.class_of("WHATEVER") == "core-ALU");
  CHECK(t4.data_cache("L1")->replacement == Replacement::RandomGroup4);
  CHECK(t4.icache_levels.size() == 3);
}

TEST_CASE("pre-Volta register file") {
  for (const char* n : {"P100", "P4", "M60", "K80"}) {
    const auto p = builtin_profile(n);
    CHECK(p.register_banks == 4);
    CHECK(p.bank_ports == 1);
  }
}

TEST_CASE("JSON round trip") {
  for (const auto& n : builtin_profiles()) {
    const auto p = builtin_profile(n);
    CHECK(profile_from_json_text(profile_to_json_text(p)) == p);
  }
}

TEST_CASE("load_profile aliases and errors") {
  CHECK(load_profile("turing").name == "T4");
  CHECK(load_profile("T4-L1-64").data_cache("L1")->size == 64 * 1024);
  CHECK_THROWS_AS(load_profile("GTX480"), Error);
  try {
    load_profile("GTX480");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownProfile);
  }
  try {
    profile_from_json_text("{\"name\": 3");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedProfileFile);
  }
}

TEST_CASE("validation catches broken geometry") {
  auto p = builtin_profile("V100");
  p.register_banks = 0;
  p.memory[0].line = 0;
  CHECK(validate_profile(p).size() >= 2);
}
