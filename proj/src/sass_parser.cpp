#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <regex>

#include "sasskit/error.hpp"
#include "sasskit/sass.hpp"

namespace sasskit {
namespace {

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<std::int64_t> parse_integer(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  if (s.empty()) return std::nullopt;
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  const auto sv = static_cast<std::int64_t>(v);
  return neg ? -sv : sv;
}

std::optional<double> parse_real(std::string_view s) {
  static const std::regex kFloat(R"([-+]?(\d+\.\d*|\.\d+|\d+)([eE][-+]?\d+)?)");
  static const std::regex kSpecial(R"([-+]?(INF|QNAN|NAN))");
  const std::string str(s);
  if (std::regex_match(str, kSpecial)) return 0.0;
  if (!std::regex_match(str, kFloat)) return std::nullopt;
  return std::strtod(str.c_str(), nullptr);
}

// Recursive-descent reader over one statement. Columns are 1-based and
// relative to the original line.
class StatementParser {
 public:
  StatementParser(std::string_view text, std::size_t line, std::size_t col0,
                  std::string_view whole)
      : s_(text), line_(line), col0_(col0), whole_(whole) {}

  Instruction parse() {
    Instruction in;
    skip_ws();
    if (eof()) fail("instruction");
    if (peek() == '@') in.predicate = parse_predicate();
    skip_ws();
    in.opcode = read_ident();
    if (in.opcode.empty() || !std::isalpha(static_cast<unsigned char>(in.opcode[0])))
      fail("opcode");
    while (!eof() && peek() == '.') {
      ++pos_;
      auto m = read_ident();
      if (m.empty()) fail("modifier after '.'");
      in.modifiers.push_back(std::move(m));
    }
    skip_ws();
    if (!eof() && peek() != ';') {
      in.operands.push_back(parse_operand());
      skip_ws();
      while (!eof() && peek() == ',') {
        ++pos_;
        skip_ws();
        in.operands.push_back(parse_operand());
        skip_ws();
      }
    }
    skip_ws();
    if (eof() || peek() != ';') fail("',' or ';'");
    ++pos_;
    skip_ws();
    if (!eof()) fail("end of statement after ';'");
    return in;
  }

 private:
  [[noreturn]] void fail(const std::string& expected) const {
    throw ParseError(line_, col0_ + pos_ + 1, expected, std::string(trim(whole_)));
  }

  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return s_[pos_]; }
  void skip_ws() {
    while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
  }
  void expect(char c) {
    if (eof() || peek() != c) fail(std::string("'") + c + "'");
    ++pos_;
  }

  std::string read_ident() {
    const auto start = pos_;
    while (!eof() && is_ident_char(peek())) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  // Token up to the next delimiter, used for immediates and symbols.
  std::string read_token() {
    const auto start = pos_;
    int paren = 0;
    while (!eof()) {
      const char c = peek();
      if (c == '(') ++paren;
      if (c == ')') --paren;
      if (paren <= 0 && (c == ',' || c == ';' || c == ']' || c == '|' ||
                         (c == '+' && pos_ > start && s_[pos_ - 1] != 'e' &&
                          s_[pos_ - 1] != 'E')))
        break;
      if (paren <= 0 && std::isspace(static_cast<unsigned char>(c))) break;
      ++pos_;
    }
    return std::string(s_.substr(start, pos_ - start));
  }

  Predicate parse_predicate() {
    expect('@');
    Predicate p;
    if (!eof() && peek() == '!') {
      p.negated = true;
      ++pos_;
    }
    const auto tok = read_ident();
    auto pr = predicate_from(tok);
    if (!pr) fail("predicate register P0..P6 or PT");
    p.index = pr->index;
    p.uniform = pr->uniform;
    return p;
  }

  std::optional<PredicateReg> predicate_from(std::string_view tok) {
    bool uniform = false;
    if (tok.starts_with("UP")) {
      uniform = true;
      tok.remove_prefix(2);
    } else if (tok.starts_with("P")) {
      tok.remove_prefix(1);
    } else {
      return std::nullopt;
    }
    if (tok == "T") return PredicateReg{kPT, uniform};
    if (tok.size() == 1 && tok[0] >= '0' && tok[0] <= '6')
      return PredicateReg{tok[0] - '0', uniform};
    if (tok.size() == 1 && std::isdigit(static_cast<unsigned char>(tok[0])))
      fail("predicate index 0..6");
    return std::nullopt;
  }

  // Registers: R0..R254, RZ, UR0..UR62, URZ, P0..P6, PT, UP0..UP6, UPT.
  std::optional<OperandValue> register_from(std::string_view tok) {
    auto numbered = [&](std::string_view digits, int max) -> std::optional<int> {
      if (digits.empty() ||
          !std::all_of(digits.begin(), digits.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
        return std::nullopt;
      int v = 0;
      std::from_chars(digits.data(), digits.data() + digits.size(), v);
      if (digits.size() > 4 || v > max) fail("register index <= " + std::to_string(max));
      return v;
    };
    if (tok == "RZ") return GeneralReg{kRZ};
    if (tok == "URZ") return UniformReg{kURZ};
    if (tok.starts_with("UR")) {
      if (auto v = numbered(tok.substr(2), 62)) return UniformReg{*v};
      return std::nullopt;
    }
    if (tok.starts_with("R")) {
      if (auto v = numbered(tok.substr(1), 254)) return GeneralReg{*v};
      return std::nullopt;
    }
    if (auto p = predicate_from(tok)) return *p;
    return std::nullopt;
  }

  std::vector<std::string> read_attributes() {
    std::vector<std::string> attrs;
    while (!eof() && peek() == '.') {
      ++pos_;
      auto a = read_ident();
      if (a.empty()) fail("attribute after '.'");
      attrs.push_back(std::move(a));
    }
    return attrs;
  }

  Operand parse_operand() {
    Operand op;
    if (eof()) fail("operand");
    if (peek() == '-' && pos_ + 1 < s_.size() &&
        (std::isalpha(static_cast<unsigned char>(s_[pos_ + 1])) || s_[pos_ + 1] == '|') &&
        s_.substr(pos_, 4) != "-INF" && s_.substr(pos_, 5) != "-QNAN") {
      op.negated = true;
      ++pos_;
    }
    if (!eof() && (peek() == '!' || peek() == '~')) {
      op.inverted = true;
      ++pos_;
    }
    if (!eof() && peek() == '|') {
      op.absolute = true;
      ++pos_;
    }
    if (eof()) fail("operand");

    if (peek() == '[') {
      op.value = parse_memref();
    } else if (peek() == 'c' && pos_ + 1 < s_.size() && s_[pos_ + 1] == '[') {
      op.value = parse_constref();
    } else if (std::isalpha(static_cast<unsigned char>(peek())) || peek() == '_') {
      const auto save = pos_;
      const auto ident = read_ident();
      if (auto reg = register_from(ident)) {
        op.value = *reg;
        op.attributes = read_attributes();
      } else {
        pos_ = save;
        auto tok = read_token();
        if (auto r = parse_real(tok); r && (tok == "INF" || tok == "QNAN" || tok == "NAN")) {
          op.value = Immediate{true, 0, *r, tok};
        } else {
          op.value = Symbol{tok};
        }
      }
    } else {
      const auto start = pos_;
      auto tok = read_token();
      if (tok.empty()) fail("operand");
      if (auto v = parse_integer(tok)) {
        op.value = Immediate{false, *v, 0.0, tok};
      } else if (auto r = parse_real(tok)) {
        op.value = Immediate{true, 0, *r, tok};
      } else if (tok.front() == '`' || tok.front() == '(') {
        op.value = Symbol{tok};
      } else {
        pos_ = start;
        fail("register, immediate, c[bank][offset] or [address]");
      }
    }
    if (op.absolute) expect('|');
    return op;
  }

  std::int64_t read_int(const char* what) {
    skip_ws();
    const auto start = pos_;
    if (!eof() && (peek() == '-' || peek() == '+')) ++pos_;
    while (!eof() && is_ident_char(peek())) ++pos_;
    auto v = parse_integer(s_.substr(start, pos_ - start));
    if (!v) {
      pos_ = start;
      fail(what);
    }
    skip_ws();
    return *v;
  }

  ConstRef parse_constref() {
    ++pos_;  // 'c'
    expect('[');
    const auto bank = read_int("constant bank");
    expect(']');
    expect('[');
    const auto offset = read_int("constant offset");
    expect(']');
    if (bank < 0) fail("non-negative constant bank");
    return ConstRef{static_cast<std::uint32_t>(bank), offset};
  }

  MemRef parse_memref() {
    expect('[');
    MemRef m;
    bool have_base = false;
    bool first = true;
    for (;;) {
      skip_ws();
      if (eof()) fail("']'");
      bool negative = false;
      if (!first) {
        if (peek() == ']') break;
        if (peek() == '+') {
          ++pos_;
        } else if (peek() == '-') {
          // "-0x10" handled as a signed immediate below
        } else {
          fail("'+' or ']'");
        }
        skip_ws();
      }
      first = false;
      if (eof()) fail("address term");
      if (std::isalpha(static_cast<unsigned char>(peek()))) {
        const auto save = pos_;
        const auto ident = read_ident();
        auto reg = register_from(ident);
        if (reg && std::holds_alternative<GeneralReg>(*reg) && !have_base) {
          m.base = std::get<GeneralReg>(*reg);
          m.base_attributes = read_attributes();
          have_base = true;
        } else if (reg && std::holds_alternative<UniformReg>(*reg) &&
                   !m.uniform_offset) {
          m.uniform_offset = std::get<UniformReg>(*reg);
          read_attributes();
        } else {
          pos_ = save;
          fail("base register or offset");
        }
      } else {
        const auto start = pos_;
        if (peek() == '-') {
          negative = true;
          ++pos_;
        }
        while (!eof() && is_ident_char(peek())) ++pos_;
        auto v = parse_integer(s_.substr(start + (negative ? 1 : 0),
                                         pos_ - start - (negative ? 1 : 0)));
        if (!v) {
          pos_ = start;
          fail("address offset");
        }
        m.offset += negative ? -*v : *v;
      }
    }
    expect(']');
    return m;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_;
  std::size_t col0_;
  std::string_view whole_;
};

struct HexComment {
  std::uint64_t value;
  std::size_t begin;  // offset of "/*"
};

// Trailing "/* 0x... */" comments at the end of a line, in order.
std::vector<HexComment> strip_hex_comments(std::string_view& line) {
  std::vector<HexComment> out;
  for (;;) {
    auto t = trim(line);
    if (!t.ends_with("*/")) break;
    const auto open = t.rfind("/*");
    if (open == std::string_view::npos) break;
    auto inner = trim(t.substr(open + 2, t.size() - open - 4));
    if (!(inner.starts_with("0x") || inner.starts_with("0X"))) break;
    std::uint64_t v = 0;
    auto digits = inner.substr(2);
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v, 16);
    if (ec != std::errc() || p != digits.data() + digits.size()) break;
    const auto begin = static_cast<std::size_t>(t.data() - line.data()) + open;
    out.insert(out.begin(), HexComment{v, begin});
    line = line.substr(0, begin);
  }
  return out;
}

// "/*0288*/" at the start of a line.
std::optional<std::uint64_t> strip_address(std::string_view& line, std::size_t& consumed,
                                           std::size_t line_no, std::string_view whole) {
  const auto lead = line.size() - trim(line).size() -
                    (line.size() - line.find_last_not_of(" \t\r") - 1);
  auto t = line.substr(std::min(lead, line.size()));
  if (!t.starts_with("/*")) return std::nullopt;
  const auto close = t.find("*/");
  if (close == std::string_view::npos)
    throw ParseError(line_no, lead + 1, "'*/' closing the address comment",
                     std::string(trim(whole)));
  auto inner = trim(t.substr(2, close - 2));
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), v, 16);
  if (inner.empty() || ec != std::errc() || p != inner.data() + inner.size())
    throw ParseError(line_no, lead + 3, "hexadecimal address", std::string(trim(whole)));
  consumed = lead + close + 2;
  line = line.substr(consumed);
  return v;
}

std::optional<Generation> generation_from_sm(int sm) {
  if (sm >= 75) return Generation::Turing;
  if (sm >= 70) return Generation::Volta;
  if (sm >= 60) return Generation::Pascal;
  if (sm >= 50) return Generation::Maxwell;
  if (sm >= 30) return Generation::Kepler;
  return std::nullopt;
}

std::optional<Generation> detect_arch(std::string_view line) {
  static const std::regex kSm(R"(EF_CUDA_SM(\d+))");
  std::cmatch m;
  if (std::regex_search(line.data(), line.data() + line.size(), m, kSm))
    return generation_from_sm(std::stoi(m[1].str()));
  return std::nullopt;
}

Instruction parse_statement(std::string_view line, std::size_t line_no) {
  const std::string_view whole = line;
  auto words = strip_hex_comments(line);
  std::size_t consumed = 0;
  auto address = strip_address(line, consumed, line_no, whole);
  // Dual-issue braces in Maxwell listings.
  std::size_t brace = 0;
  auto t = line;
  while (!t.empty() && (std::isspace(static_cast<unsigned char>(t.front())) ||
                        t.front() == '{')) {
    t.remove_prefix(1);
    ++brace;
  }
  while (!t.empty() && (std::isspace(static_cast<unsigned char>(t.back())) ||
                        t.back() == '}'))
    t.remove_suffix(1);
  StatementParser sp(t, line_no, consumed + brace, whole);
  Instruction in = sp.parse();
  in.address = address;
  for (const auto& w : words) in.raw_words.push_back(w.value);
  return in;
}

bool is_skippable(std::string_view t) {
  return t.empty() || t.starts_with("//") || t.starts_with("#") || t == "..." ||
         t.starts_with("Function") || t.starts_with(".") || t == "{" || t == "}" ||
         t.starts_with("---") || t.starts_with("Fatbin") || t.starts_with("code for") ||
         t.starts_with("arch =") || t.starts_with("=");
}

}  // namespace

Instruction parse_instruction(std::string_view line) {
  if (trim(line).empty()) throw ParseError(1, 1, "instruction", "");
  return parse_statement(line, 1);
}

Program parse_listing(std::string_view text, const ParseOptions& options) {
  Program prog;
  prog.arch = options.arch;
  std::vector<std::uint64_t> pending;
  bool last_was_instruction = false;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto t = trim(line);

    if (!options.arch && t.find("EF_CUDA_SM") != std::string_view::npos) {
      if (auto g = detect_arch(t)) prog.arch = g;
    }

    std::string_view rest = line;
    auto words = strip_hex_comments(rest);
    if (!words.empty() && trim(rest).empty()) {
      // Bare hex line: the second word of a Volta/Turing instruction, or a
      // pre-Volta control word heading the next bundle.
      for (const auto& w : words) {
        if (prog.arch && has_embedded_controls(*prog.arch) && last_was_instruction &&
            prog.instructions.back().raw_words.size() == 1) {
          prog.instructions.back().raw_words.push_back(w.value);
        } else {
          pending.push_back(w.value);
          last_was_instruction = false;
        }
      }
      continue;
    }

    const bool has_address = t.starts_with("/*");
    const bool has_semicolon = t.find(';') != std::string_view::npos;
    if (!has_address && (!has_semicolon || is_skippable(t))) {
      if (!t.empty()) last_was_instruction = false;
      continue;
    }
    Instruction in = parse_statement(line, line_no);
    in.leading_words = std::move(pending);
    pending.clear();
    prog.instructions.push_back(std::move(in));
    last_was_instruction = true;
    if (start > text.size()) break;
  }
  prog.trailing_words = std::move(pending);
  return prog;
}

}  // namespace sasskit
