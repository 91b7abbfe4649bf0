#include "dbender/isa.hpp"

#include <algorithm>
#include <cstring>

#include "dbender/error.hpp"

namespace dbender {

namespace {

using u128 = unsigned __int128;

u128 to_u128(Word72 w) { return (static_cast<u128>(w.high) << 64) | w.low; }

Word72 from_u128(u128 v) {
  Word72 w;
  w.low = static_cast<uint64_t>(v);
  w.high = static_cast<uint8_t>(v >> 64);
  return w;
}

uint64_t get_field(u128 v, int lsb, int width) {
  return static_cast<uint64_t>(v >> lsb) & ((uint64_t{1} << width) - 1);
}

void put_field(u128& v, int lsb, int width, uint64_t value) {
  v |= static_cast<u128>(value & ((uint64_t{1} << width) - 1)) << lsb;
}

constexpr int slot_lsb(int slot) { return 54 - 18 * slot; }

constexpr std::array<std::string_view, 8> kDramNames = {"NOP", "ACT", "PRE", "PREA", "READ", "WRITE", "REF", "ZQS"};

constexpr std::array<std::string_view, 21> kRegularNames = {
    "",    "LD",   "ST",  "AND",   "OR",   "XOR",  "ADD", "SUB", "ADDI", "MV",  "SRC",
    "LI",  "BL",   "BEQ", "JUMP",  "SLEEP", "LDWD", "LDPC", "SRE", "SRX", "END"};

void require_encodable(RegisterId r, const char* what) {
  if (!r.encodable()) {
    fail(ErrorCode::InvalidRegisterField, std::string(what) + " cannot hold " + register_name(r));
  }
}

void require_zero(bool ok, const char* what) {
  if (!ok) fail(ErrorCode::InvalidRegisterField, std::string("unused field must be zero: ") + what);
}

void validate_command(const DramCommand& c) {
  if (c.opcode == DramOpcode::NOP) {
    require_zero(c == DramCommand{}, "NOP fields");
    return;
  }
  require_encodable(c.reg_a, "reg_a");
  require_encodable(c.reg_b, "reg_b");
  if (!uses_reg_a(c.opcode)) require_zero(c.reg_a == R0 && !c.flags.inc_a, "reg_a");
  if (!uses_reg_b(c.opcode)) require_zero(c.reg_b == R0 && !c.flags.inc_b, "reg_b");
}

uint64_t encode_slot(const DramCommand& c) {
  uint64_t v = 0;
  v |= static_cast<uint64_t>(c.opcode) << 14;
  v |= static_cast<uint64_t>(c.reg_a.index()) << 10;
  v |= static_cast<uint64_t>(c.reg_b.index()) << 6;
  v |= static_cast<uint64_t>(c.flags.inc_a) << 5;
  v |= static_cast<uint64_t>(c.flags.inc_b) << 4;
  v |= static_cast<uint64_t>(c.flags.auto_precharge) << 3;
  v |= static_cast<uint64_t>(c.flags.aux) << 2;
  return v;
}

DramCommand decode_slot(uint64_t v) {
  const auto op = static_cast<uint8_t>(v >> 14);
  if (op >= kDramOpcodeCount) {
    fail(ErrorCode::UnknownOpcode, "reserved DRAM opcode " + std::to_string(op));
  }
  DramCommand c;
  c.opcode = static_cast<DramOpcode>(op);
  if (c.opcode == DramOpcode::NOP) return c;
  if (uses_reg_a(c.opcode)) {
    c.reg_a = RegisterId(static_cast<uint8_t>((v >> 10) & 0xF));
    c.flags.inc_a = (v >> 5) & 1;
  }
  if (uses_reg_b(c.opcode)) {
    c.reg_b = RegisterId(static_cast<uint8_t>((v >> 6) & 0xF));
    c.flags.inc_b = (v >> 4) & 1;
  }
  c.flags.auto_precharge = (v >> 3) & 1;
  c.flags.aux = (v >> 2) & 1;
  return c;
}

std::string reg_with_inc(RegisterId r, bool inc) { return register_name(r) + (inc ? "+" : ""); }

}  // namespace

std::string register_name(RegisterId r) {
  switch (r.index()) {
    case 13: return "BASR";
    case 14: return "RASR";
    case 15: return "CASR";
    case 16: return "WDR";
    default: return "R" + std::to_string(r.index());
  }
}

std::optional<RegisterId> parse_register(std::string_view t) {
  if (t == "BASR") return BASR;
  if (t == "RASR") return RASR;
  if (t == "CASR") return CASR;
  if (t == "WDR") return WDR;
  if (t.size() < 2 || t.size() > 3 || t[0] != 'R') return std::nullopt;
  int v = 0;
  for (char ch : t.substr(1)) {
    if (ch < '0' || ch > '9') return std::nullopt;
    v = v * 10 + (ch - '0');
  }
  if (t.size() == 3 && t[1] == '0') return std::nullopt;
  if (v > 12) return std::nullopt;
  return RegisterId(static_cast<uint8_t>(v));
}

bool uses_reg_a(DramOpcode op) {
  return op == DramOpcode::ACT || op == DramOpcode::PRE || op == DramOpcode::READ || op == DramOpcode::WRITE;
}

bool uses_reg_b(DramOpcode op) {
  return op == DramOpcode::ACT || op == DramOpcode::READ || op == DramOpcode::WRITE;
}

OperandShape operand_shape(RegularOpcode op) {
  switch (op) {
    case RegularOpcode::LD: return {true, true, false, true};
    case RegularOpcode::ST: return {false, true, true, true};
    case RegularOpcode::AND:
    case RegularOpcode::OR:
    case RegularOpcode::XOR:
    case RegularOpcode::ADD:
    case RegularOpcode::SUB: return {true, true, true, false};
    case RegularOpcode::ADDI: return {true, true, false, true};
    case RegularOpcode::MV:
    case RegularOpcode::SRC: return {true, true, false, false};
    case RegularOpcode::LI: return {true, false, false, true};
    case RegularOpcode::BL:
    case RegularOpcode::BEQ: return {false, true, true, true};
    case RegularOpcode::JUMP:
    case RegularOpcode::SLEEP:
    case RegularOpcode::HINT: return {false, false, false, true};
    case RegularOpcode::LDWD: return {false, true, false, true};
    case RegularOpcode::LDPC: return {true, false, false, true};
    case RegularOpcode::SRE:
    case RegularOpcode::SRX:
    case RegularOpcode::END: return {};
  }
  return {};
}

bool is_branch(RegularOpcode op) {
  return op == RegularOpcode::BL || op == RegularOpcode::BEQ || op == RegularOpcode::JUMP;
}

bool is_valid_regular_opcode(uint8_t raw) {
  return (raw >= static_cast<uint8_t>(RegularOpcode::LD) && raw <= static_cast<uint8_t>(RegularOpcode::END)) ||
         raw == static_cast<uint8_t>(RegularOpcode::HINT);
}

bool Word72::bit(int index) const {
  if (index < 64) return (low >> index) & 1;
  return (high >> (index - 64)) & 1;
}

void validate_instruction(const Instruction& instr) {
  if (const auto* d = std::get_if<DramInstruction>(&instr)) {
    for (const auto& c : d->slots) validate_command(c);
    return;
  }
  const auto& r = std::get<RegularInstruction>(instr);
  if (!is_valid_regular_opcode(static_cast<uint8_t>(r.opcode))) {
    fail(ErrorCode::UnknownOpcode, "regular opcode " + std::to_string(static_cast<int>(r.opcode)));
  }
  const auto shape = operand_shape(r.opcode);
  if (r.opcode == RegularOpcode::LDWD) {
    if (!(r.rd == WDR)) fail(ErrorCode::InvalidRegisterField, "LDWD destination must be WDR");
    if (r.imm < 0 || r.imm >= kWdrSlices) fail(ErrorCode::ImmOverflow, "LDWD slice out of range");
  } else if (shape.rd) {
    require_encodable(r.rd, "rd");
  } else {
    require_zero(r.rd == R0, "rd");
  }
  if (shape.rs1) require_encodable(r.rs1, "rs1"); else require_zero(r.rs1 == R0, "rs1");
  if (shape.rs2) require_encodable(r.rs2, "rs2"); else require_zero(r.rs2 == R0, "rs2");
  if (!shape.imm) require_zero(r.imm == 0, "imm");
  if ((r.opcode == RegularOpcode::SLEEP || r.opcode == RegularOpcode::HINT) && r.imm < 0) {
    fail(ErrorCode::ImmOverflow, std::string(mnemonic(r.opcode)) + " count must be non-negative");
  }
}

Word72 encode_instruction(const Instruction& instr) {
  validate_instruction(instr);
  u128 v = 0;
  if (const auto* d = std::get_if<DramInstruction>(&instr)) {
    for (int s = 0; s < kSlotsPerInstruction; ++s) put_field(v, slot_lsb(s), 18, encode_slot(d->slots[s]));
    return from_u128(v);
  }
  const auto& r = std::get<RegularInstruction>(instr);
  put_field(v, 68, 4, kRegularEscape);
  put_field(v, 62, 6, static_cast<uint8_t>(r.opcode));
  put_field(v, 58, 4, r.opcode == RegularOpcode::LDWD ? 0 : r.rd.index());
  put_field(v, 54, 4, r.rs1.index());
  put_field(v, 50, 4, r.rs2.index());
  put_field(v, 18, 32, static_cast<uint32_t>(r.imm));
  return from_u128(v);
}

Instruction decode_instruction(Word72 word) {
  const u128 v = to_u128(word);
  if (get_field(v, 68, 4) != kRegularEscape) {
    DramInstruction d;
    for (int s = 0; s < kSlotsPerInstruction; ++s) d.slots[s] = decode_slot(get_field(v, slot_lsb(s), 18));
    return d;
  }
  const auto raw = static_cast<uint8_t>(get_field(v, 62, 6));
  if (!is_valid_regular_opcode(raw)) {
    fail(ErrorCode::UnknownOpcode, "reserved regular opcode " + std::to_string(raw));
  }
  RegularInstruction r;
  r.opcode = static_cast<RegularOpcode>(raw);
  const auto shape = operand_shape(r.opcode);
  if (shape.rd) r.rd = RegisterId(static_cast<uint8_t>(get_field(v, 58, 4)));
  if (shape.rs1) r.rs1 = RegisterId(static_cast<uint8_t>(get_field(v, 54, 4)));
  if (shape.rs2) r.rs2 = RegisterId(static_cast<uint8_t>(get_field(v, 50, 4)));
  if (shape.imm) r.imm = static_cast<int32_t>(static_cast<uint32_t>(get_field(v, 18, 32)));
  if (r.opcode == RegularOpcode::LDWD) {
    r.rd = WDR;
    if (r.imm < 0 || r.imm >= kWdrSlices) fail(ErrorCode::ImmOverflow, "LDWD slice out of range");
  }
  return r;
}

std::string_view mnemonic(DramOpcode op) { return kDramNames[static_cast<size_t>(op)]; }

std::string_view mnemonic(RegularOpcode op) {
  if (op == RegularOpcode::HINT) return "HINT";
  const auto i = static_cast<size_t>(op);
  return i < kRegularNames.size() ? kRegularNames[i] : "?";
}

std::optional<DramOpcode> parse_dram_mnemonic(std::string_view text) {
  for (size_t i = 0; i < kDramNames.size(); ++i) {
    if (kDramNames[i] == text) return static_cast<DramOpcode>(i);
  }
  return std::nullopt;
}

std::optional<RegularOpcode> parse_regular_mnemonic(std::string_view text) {
  if (text == "HINT") return RegularOpcode::HINT;
  for (size_t i = 1; i < kRegularNames.size(); ++i) {
    if (kRegularNames[i] == text) return static_cast<RegularOpcode>(i);
  }
  return std::nullopt;
}

std::string disassemble_command(const DramCommand& c) {
  std::string out(mnemonic(c.opcode));
  if (c.opcode == DramOpcode::NOP) return out;
  if (uses_reg_a(c.opcode)) out += " " + reg_with_inc(c.reg_a, c.flags.inc_a);
  if (uses_reg_b(c.opcode)) out += ", " + reg_with_inc(c.reg_b, c.flags.inc_b);
  if (c.flags.auto_precharge) out += " ap";
  if (c.flags.aux) out += " aux";
  return out;
}

std::string disassemble(const Instruction& instr) {
  if (const auto* d = std::get_if<DramInstruction>(&instr)) {
    if (*d == DramInstruction{}) return "NOP4";
    std::string out;
    for (int s = 0; s < kSlotsPerInstruction; ++s) {
      if (s) out += " | ";
      out += disassemble_command(d->slots[s]);
    }
    return out;
  }
  const auto& r = std::get<RegularInstruction>(instr);
  std::string out(mnemonic(r.opcode));
  const std::string imm = std::to_string(r.imm);
  switch (r.opcode) {
    case RegularOpcode::LD:
      return out + " " + register_name(r.rd) + ", " + register_name(r.rs1) + ", " + imm;
    case RegularOpcode::ST:
      return out + " " + register_name(r.rs2) + ", " + register_name(r.rs1) + ", " + imm;
    case RegularOpcode::AND:
    case RegularOpcode::OR:
    case RegularOpcode::XOR:
    case RegularOpcode::ADD:
    case RegularOpcode::SUB:
      return out + " " + register_name(r.rd) + ", " + register_name(r.rs1) + ", " + register_name(r.rs2);
    case RegularOpcode::ADDI:
      return out + " " + register_name(r.rd) + ", " + register_name(r.rs1) + ", " + imm;
    case RegularOpcode::MV:
    case RegularOpcode::SRC:
      return out + " " + register_name(r.rd) + ", " + register_name(r.rs1);
    case RegularOpcode::LI:
    case RegularOpcode::LDPC:
      return out + " " + register_name(r.rd) + ", " + imm;
    case RegularOpcode::BL:
    case RegularOpcode::BEQ:
      return out + " " + imm + ", " + register_name(r.rs1) + ", " + register_name(r.rs2);
    case RegularOpcode::JUMP:
    case RegularOpcode::SLEEP:
    case RegularOpcode::HINT:
      return out + " " + imm;
    case RegularOpcode::LDWD:
      return out + " " + imm + ", " + register_name(r.rs1);
    case RegularOpcode::SRE:
    case RegularOpcode::SRX:
    case RegularOpcode::END:
      return out;
  }
  return out;
}

std::vector<uint8_t> write_image(std::span<const Instruction> program) {
  std::vector<uint8_t> out(kImageMagic.begin(), kImageMagic.end());
  const auto n = static_cast<uint32_t>(program.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(n >> (8 * i)));
  for (const auto& instr : program) {
    const Word72 w = encode_instruction(instr);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(w.low >> (8 * i)));
    out.push_back(w.high);
  }
  return out;
}

std::vector<Word72> read_image_words(std::span<const uint8_t> bytes) {
  if (bytes.size() < kImageMagic.size() ||
      std::memcmp(bytes.data(), kImageMagic.data(), kImageMagic.size()) != 0) {
    fail(ErrorCode::BadMagic, "program image does not start with DBND0001");
  }
  if (bytes.size() < 12) fail(ErrorCode::BadImage, "truncated header");
  uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n |= static_cast<uint32_t>(bytes[8 + i]) << (8 * i);
  if (bytes.size() != 12 + static_cast<size_t>(n) * 9) {
    fail(ErrorCode::BadImage, "image length does not match instruction count " + std::to_string(n));
  }
  std::vector<Word72> out(n);
  for (uint32_t k = 0; k < n; ++k) {
    const uint8_t* p = bytes.data() + 12 + k * 9;
    for (int i = 0; i < 8; ++i) out[k].low |= static_cast<uint64_t>(p[i]) << (8 * i);
    out[k].high = p[8];
  }
  return out;
}

std::vector<Instruction> read_image(std::span<const uint8_t> bytes) {
  std::vector<Instruction> out;
  for (const Word72& w : read_image_words(bytes)) out.push_back(decode_instruction(w));
  return out;
}

DramCommand make_nop() { return {}; }

DramCommand make_act(RegisterId bank, bool inc_bank, RegisterId row, bool inc_row) {
  return {DramOpcode::ACT, bank, row, {inc_bank, inc_row, false, false}};
}

DramCommand make_pre(RegisterId bank, bool inc_bank, bool aux) {
  return {DramOpcode::PRE, bank, R0, {inc_bank, false, false, aux}};
}

DramCommand make_prea() { return {DramOpcode::PREA, R0, R0, {}}; }

DramCommand make_read(RegisterId bank, bool inc_bank, RegisterId col, bool inc_col, bool ap, bool aux) {
  return {DramOpcode::READ, bank, col, {inc_bank, inc_col, ap, aux}};
}

DramCommand make_write(RegisterId bank, bool inc_bank, RegisterId col, bool inc_col, bool ap, bool aux) {
  return {DramOpcode::WRITE, bank, col, {inc_bank, inc_col, ap, aux}};
}

DramCommand make_ref() { return {DramOpcode::REF, R0, R0, {}}; }
DramCommand make_zqs() { return {DramOpcode::ZQS, R0, R0, {}}; }

RegularInstruction make_regular(RegularOpcode op, RegisterId rd, RegisterId rs1, RegisterId rs2, int32_t imm) {
  return {op, rd, rs1, rs2, imm};
}

}  // namespace dbender
