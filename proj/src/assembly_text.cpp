#include "dbender/assembly_text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "dbender/error.hpp"

namespace dbender {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char ch : s) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.')) return false;
  }
  return true;
}

std::optional<int64_t> parse_integer(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  if (s.empty()) return std::nullopt;
  uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec == std::errc::result_out_of_range) return INT64_MAX;
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  if (v > static_cast<uint64_t>(INT64_MAX)) return INT64_MAX;
  return neg ? -static_cast<int64_t>(v) : static_cast<int64_t>(v);
}

class LineParser {
 public:
  LineParser(Program& program, size_t line) : program_(program), line_(line) {}

  [[noreturn]] void error(ErrorCode code, const std::string& what) const {
    fail(code, "line " + std::to_string(line_) + ": " + what);
  }

  void statement(std::string_view text) {
    const auto tokens = tokenize(text);
    if (tokens.empty()) return;
    if (tokens[0] == "NOP4" || parse_dram_mnemonic(tokens[0])) {
      dram_line(text);
      return;
    }
    auto op = parse_regular_mnemonic(tokens[0]);
    if (!op) error(ErrorCode::UnknownMnemonic, tokens[0]);
    regular(*op, tokens);
  }

 private:
  RegisterId reg(const std::string& t) const {
    auto r = parse_register(t);
    if (!r) {
      const bool numbered = t.size() > 1 && t[0] == 'R' &&
                            std::all_of(t.begin() + 1, t.end(), [](unsigned char c) { return std::isdigit(c); });
      error(numbered ? ErrorCode::InvalidRegister : ErrorCode::SyntaxError, "expected register, got '" + t + "'");
    }
    if (r->is_wdr()) error(ErrorCode::InvalidRegister, "WDR is only reachable through LDWD");
    return *r;
  }

  int32_t imm(const std::string& t) const {
    auto v = parse_integer(t);
    if (!v) error(ErrorCode::SyntaxError, "expected immediate, got '" + t + "'");
    if (*v < INT32_MIN || *v > int64_t{UINT32_MAX}) error(ErrorCode::ImmOverflow, t);
    return static_cast<int32_t>(static_cast<uint32_t>(*v));
  }

  void expect_count(const std::vector<std::string>& t, size_t n) const {
    if (t.size() != n + 1) {
      error(ErrorCode::SyntaxError, t[0] + " takes " + std::to_string(n) + " operand(s)");
    }
  }

  void dram_line(std::string_view text) {
    DramInstruction instr;
    int slot = 0;
    size_t start = 0;
    while (start <= text.size()) {
      size_t bar = text.find('|', start);
      if (bar == std::string_view::npos) bar = text.size();
      const auto tokens = tokenize(text.substr(start, bar - start));
      if (tokens.empty()) error(ErrorCode::SyntaxError, "empty command slot");
      if (tokens[0] == "NOP4") {
        if (tokens.size() != 1) error(ErrorCode::SyntaxError, "NOP4 takes no operands");
        slot += 4;
      } else {
        if (slot >= kSlotsPerInstruction) error(ErrorCode::SyntaxError, "more than four commands");
        instr.slots[slot++] = command(tokens);
      }
      if (slot > kSlotsPerInstruction) error(ErrorCode::SyntaxError, "more than four commands");
      start = bar + 1;
    }
    program_.append_dram_instruction(instr);
  }

  DramCommand command(const std::vector<std::string>& t) const {
    auto op = parse_dram_mnemonic(t[0]);
    if (!op) {
      if (parse_regular_mnemonic(t[0])) error(ErrorCode::SyntaxError, t[0] + " cannot share a line with commands");
      error(ErrorCode::UnknownMnemonic, t[0]);
    }
    DramCommand c;
    c.opcode = *op;
    size_t i = 1;
    auto reg_operand = [&](RegisterId& r, bool& inc) {
      if (i >= t.size()) error(ErrorCode::SyntaxError, t[0] + " is missing a register");
      std::string name = t[i++];
      if (!name.empty() && name.back() == '+') {
        inc = true;
        name.pop_back();
      }
      r = reg(name);
    };
    if (uses_reg_a(c.opcode)) reg_operand(c.reg_a, c.flags.inc_a);
    if (uses_reg_b(c.opcode)) reg_operand(c.reg_b, c.flags.inc_b);
    for (; i < t.size(); ++i) {
      if (c.opcode == DramOpcode::NOP) error(ErrorCode::SyntaxError, "NOP takes no operands");
      if (t[i] == "ap") c.flags.auto_precharge = true;
      else if (t[i] == "aux") c.flags.aux = true;
      else error(ErrorCode::SyntaxError, "unexpected '" + t[i] + "' after " + t[0]);
    }
    return c;
  }

  void regular(RegularOpcode op, const std::vector<std::string>& t) {
    RegularInstruction r;
    r.opcode = op;
    std::string target;
    auto branch_target = [&](const std::string& tok) {
      if (parse_integer(tok)) {
        r.imm = imm(tok);
      } else if (is_identifier(tok)) {
        target = tok;
      } else {
        error(ErrorCode::SyntaxError, "bad branch target '" + tok + "'");
      }
    };
    switch (op) {
      case RegularOpcode::LD:
      case RegularOpcode::ADDI:
        expect_count(t, 3);
        r.rd = reg(t[1]);
        r.rs1 = reg(t[2]);
        r.imm = imm(t[3]);
        break;
      case RegularOpcode::ST:
        expect_count(t, 3);
        r.rs2 = reg(t[1]);
        r.rs1 = reg(t[2]);
        r.imm = imm(t[3]);
        break;
      case RegularOpcode::AND:
      case RegularOpcode::OR:
      case RegularOpcode::XOR:
      case RegularOpcode::ADD:
      case RegularOpcode::SUB:
        expect_count(t, 3);
        r.rd = reg(t[1]);
        r.rs1 = reg(t[2]);
        r.rs2 = reg(t[3]);
        break;
      case RegularOpcode::MV:
      case RegularOpcode::SRC:
        expect_count(t, 2);
        r.rd = reg(t[1]);
        r.rs1 = reg(t[2]);
        break;
      case RegularOpcode::LI:
      case RegularOpcode::LDPC:
        expect_count(t, 2);
        r.rd = reg(t[1]);
        r.imm = imm(t[2]);
        break;
      case RegularOpcode::BL:
      case RegularOpcode::BEQ:
        expect_count(t, 3);
        branch_target(t[1]);
        r.rs1 = reg(t[2]);
        r.rs2 = reg(t[3]);
        break;
      case RegularOpcode::JUMP:
        expect_count(t, 1);
        branch_target(t[1]);
        break;
      case RegularOpcode::SLEEP:
      case RegularOpcode::HINT:
        expect_count(t, 1);
        r.imm = imm(t[1]);
        break;
      case RegularOpcode::LDWD:
        expect_count(t, 2);
        r.rd = WDR;
        r.imm = imm(t[1]);
        if (r.imm < 0 || r.imm >= kWdrSlices) error(ErrorCode::ImmOverflow, "WDR slice " + t[1]);
        r.rs1 = reg(t[2]);
        break;
      case RegularOpcode::SRE:
      case RegularOpcode::SRX:
      case RegularOpcode::END:
        expect_count(t, 0);
        break;
    }
    try {
      program_.append_regular(r, target);
    } catch (const Error& e) {
      error(e.code(), e.what());
    }
  }

  Program& program_;
  size_t line_;
};

}  // namespace

Program parse_assembly(std::string_view text) {
  Program program;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    LineParser parser(program, line_no);
    if (auto colon = line.find(':'); colon != std::string_view::npos) {
      const auto name = trim(line.substr(0, colon));
      if (!is_identifier(name)) parser.error(ErrorCode::SyntaxError, "bad label '" + std::string(name) + "'");
      if (parse_register(name) || parse_regular_mnemonic(name) || parse_dram_mnemonic(name)) {
        parser.error(ErrorCode::SyntaxError, "label '" + std::string(name) + "' is a reserved word");
      }
      try {
        program.append_label(std::string(name));
      } catch (const Error& e) {
        parser.error(e.code(), e.what());
      }
      line = trim(line.substr(colon + 1));
    }
    if (!line.empty()) parser.statement(line);
    if (nl == text.size()) break;
  }
  return program;
}

std::string disassemble_program(const std::vector<Instruction>& program) {
  std::ostringstream os;
  for (const auto& instr : program) os << disassemble(instr) << "\n";
  return os.str();
}

}  // namespace dbender
