#include "doctest.h"

#include <sstream>

#include "fixtures.hpp"
#include "json.hpp"
#include "sasskit/cli.hpp"

using namespace sasskit::cli;
using json = nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args, const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = dispatch(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string path(const std::string& name) { return std::string(SASSKIT_FIXTURES) + "/" + name; }

}  // namespace

TEST_CASE("profiles list") {
  const auto r = run({"profiles", "list"});
  CHECK(r.code == kExitOk);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 6);
}

TEST_CASE("decode-ctl") {
  const auto r = run({"decode-ctl", "--arch", "pascal", "--format", "json", "0x000f8800fe2007f1"});
  REQUIRE(r.code == kExitOk);
  const auto j = json::parse(r.out);
  REQUIRE(j["sections"].size() == 3);
  CHECK(j["sections"][2]["raw"] == "0x0003e2");
  CHECK(j["sections"][2]["fields"]["stall"] == 2);
}

TEST_CASE("encode-ctl round trip") {
  const auto r = run({"encode-ctl", "--stall", "2", "--yield", "0", "--read", "3"});
  CHECK(r.out == "0x0003e2\n");
  const auto w = run({"encode-ctl", "--arch", "P100", "0x7f1", "0x7f1", "0x3e2"});
  CHECK(w.out == "0x000f8800fe2007f1\n");
}

TEST_CASE("lint exit codes") {
  CHECK(run({"lint", "--arch", "t4", path("saxpy_cublas.sass")}).code == kExitFindings);
  CHECK(run({"lint", "--arch", "t4", "--rules", "a", path("saxpy_improved.sass")}).code == kExitOk);
}

TEST_CASE("stdin input") {
  const auto r = run({"parse", "--arch", "T4", "-"}, "FADD R0, R1, R2 ;\n");
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("FADD R0, R1, R2 ;") != std::string::npos);
}

TEST_CASE("errors") {
  const auto usage = run({"frobnicate"});
  CHECK(usage.code == kExitUsage);
  CHECK(json::parse(usage.err.substr(0, usage.err.find('\n')))["error"] == "UsageError");

  const auto bad = run({"parse", "--arch", "T4"}, "FADD R0, R1 R2 ;\n");
  CHECK(bad.code == kExitInput);
  const auto j = json::parse(bad.err);
  CHECK(j["error"] == "ParseError");
  CHECK(j["line"] == 1);

  CHECK(run({"banks", "--arch", "GTX480", path("saxpy_improved.sass")}).code == kExitInput);
  CHECK(run({"lint", "--rules", "z", path("saxpy_improved.sass")}).code == kExitInput);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("json everywhere and deterministic") {
  const std::vector<std::vector<std::string>> cmds = {
      {"parse", path("turing_words.sass")},
      {"banks", "--arch", "V100", path("volta_hmma884.sass")},
      {"reassign", path("saxpy_improved.sass")},
      {"schedule", path("turing_words.sass")},
      {"multiwarp", "--warps", "0,1,4", path("saxpy_improved.sass")},
      {"memsim", "pchase", "--array-bytes", "8KiB"},
      {"memsim", "icache-sweep", "--max-bytes", "64KiB"},
      {"memsim", "aggressor-victim", "--aggressor", "48KiB", "--victim", "24KiB"},
      {"memsim", "shared", "--degree", "4"},
      {"memsim", "const", "--count", "2"},
      {"lint", path("saxpy_cublas.sass")},
      {"profiles", "show", "K80"},
  };
  for (auto args : cmds) {
    args.push_back("--format");
    args.push_back("json");
    const auto a = run(args);
    const auto b = run(args);
    INFO(args[0]);
    CHECK((a.code == kExitOk || a.code == kExitFindings));
    CHECK_NOTHROW(json::parse(a.out));
    CHECK(a.out == b.out);
  }
}
