#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dbender {

// R0-R12 are general purpose. BASR/RASR/CASR hold the bank/row/column strides
// used by the increment flags. WDR is the 512-bit wide data register and can
// only be reached through LDWD.
class RegisterId {
 public:
  constexpr RegisterId() = default;
  constexpr explicit RegisterId(uint8_t index) : index_(index) {}

  constexpr uint8_t index() const { return index_; }
  constexpr bool is_gpr() const { return index_ <= 12; }
  constexpr bool is_stride() const { return index_ >= 13 && index_ <= 15; }
  constexpr bool is_wdr() const { return index_ == 16; }
  // Fits in a 4-bit instruction field.
  constexpr bool encodable() const { return index_ <= 15; }

  friend constexpr bool operator==(RegisterId, RegisterId) = default;

 private:
  uint8_t index_ = 0;
};

inline constexpr RegisterId R0{0}, R1{1}, R2{2}, R3{3}, R4{4}, R5{5}, R6{6}, R7{7}, R8{8},
    R9{9}, R10{10}, R11{11}, R12{12};
inline constexpr RegisterId BASR{13}, RASR{14}, CASR{15}, WDR{16};

inline constexpr int kWdrSlices = 16;

// Counter ids readable through LDPC.
enum class PerfCounter : uint8_t { Cycles = 0, ActsIssued, ReadsIssued, WritesIssued, PresIssued, RefsIssued };
inline constexpr int kPerfCounterCount = 6;
inline constexpr int kSlotsPerInstruction = 4;

std::string register_name(RegisterId r);
std::optional<RegisterId> parse_register(std::string_view text);

enum class DramOpcode : uint8_t { NOP = 0, ACT = 1, PRE = 2, PREA = 3, READ = 4, WRITE = 5, REF = 6, ZQS = 7 };
inline constexpr uint8_t kRegularEscape = 0xF;
inline constexpr int kDramOpcodeCount = 8;

struct CommandFlags {
  bool inc_a = false;
  bool inc_b = false;
  bool auto_precharge = false;
  bool aux = false;

  friend bool operator==(const CommandFlags&, const CommandFlags&) = default;
};

// reg_a addresses the bank, reg_b the row (ACT) or column (READ/WRITE).
struct DramCommand {
  DramOpcode opcode = DramOpcode::NOP;
  RegisterId reg_a;
  RegisterId reg_b;
  CommandFlags flags;

  friend bool operator==(const DramCommand&, const DramCommand&) = default;
};

bool uses_reg_a(DramOpcode op);
bool uses_reg_b(DramOpcode op);

using CommandSlots = std::array<DramCommand, kSlotsPerInstruction>;

struct DramInstruction {
  CommandSlots slots{};

  friend bool operator==(const DramInstruction&, const DramInstruction&) = default;
};

enum class RegularOpcode : uint8_t {
  LD = 1,
  ST,
  AND,
  OR,
  XOR,
  ADD,
  SUB,
  ADDI,
  MV,
  SRC,
  LI,
  BL,
  BEQ,
  JUMP,
  SLEEP,
  LDWD,
  LDPC,
  SRE,
  SRX,
  END,
  HINT = 0x3E,
};

struct RegularInstruction {
  RegularOpcode opcode = RegularOpcode::END;
  RegisterId rd;
  RegisterId rs1;
  RegisterId rs2;
  int32_t imm = 0;

  friend bool operator==(const RegularInstruction&, const RegularInstruction&) = default;
};

// Which fields a regular opcode reads. Unused fields are zero in canonical form.
struct OperandShape {
  bool rd = false;
  bool rs1 = false;
  bool rs2 = false;
  bool imm = false;
};
OperandShape operand_shape(RegularOpcode op);
bool is_branch(RegularOpcode op);
bool is_valid_regular_opcode(uint8_t raw);

using Instruction = std::variant<RegularInstruction, DramInstruction>;

inline bool is_dram(const Instruction& i) { return std::holds_alternative<DramInstruction>(i); }

// Bits [63:0] in low, [71:64] in high.
struct Word72 {
  uint64_t low = 0;
  uint8_t high = 0;

  bool bit(int index) const;
  friend bool operator==(const Word72&, const Word72&) = default;
};

void validate_instruction(const Instruction& instr);
Word72 encode_instruction(const Instruction& instr);
Instruction decode_instruction(Word72 word);

std::string_view mnemonic(DramOpcode op);
std::string_view mnemonic(RegularOpcode op);
std::optional<DramOpcode> parse_dram_mnemonic(std::string_view text);
std::optional<RegularOpcode> parse_regular_mnemonic(std::string_view text);

std::string disassemble_command(const DramCommand& cmd);
std::string disassemble(const Instruction& instr);

// Program image: "DBND0001", u32 little-endian count, 9 little-endian bytes per instruction.
inline constexpr std::string_view kImageMagic = "DBND0001";
std::vector<uint8_t> write_image(std::span<const Instruction> program);
std::vector<Instruction> read_image(std::span<const uint8_t> bytes);
// Header-checked raw words, not decoded.
std::vector<Word72> read_image_words(std::span<const uint8_t> bytes);

// Convenience constructors.
DramCommand make_nop();
DramCommand make_act(RegisterId bank, bool inc_bank, RegisterId row, bool inc_row);
DramCommand make_pre(RegisterId bank, bool inc_bank, bool aux = false);
DramCommand make_prea();
DramCommand make_read(RegisterId bank, bool inc_bank, RegisterId col, bool inc_col, bool auto_precharge = false,
                      bool aux = false);
DramCommand make_write(RegisterId bank, bool inc_bank, RegisterId col, bool inc_col, bool auto_precharge = false,
                       bool aux = false);
DramCommand make_ref();
DramCommand make_zqs();

RegularInstruction make_regular(RegularOpcode op, RegisterId rd = R0, RegisterId rs1 = R0, RegisterId rs2 = R0,
                                int32_t imm = 0);

}  // namespace dbender
