#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dbender/isa.hpp"

namespace dbender {

// Delays above this many NOP slots are realized with a SLEEP instead of NOP padding.
inline constexpr uint32_t kMaxNopDelaySlots = 32;

struct AssemblyOptions {
  size_t capacity = 2048;
  size_t fifo_capacity = 512;
  size_t scratchpad_words = 1024;
  // Budget for the functional pre-execution that sizes READ hints.
  uint64_t preexec_step_limit = uint64_t{1} << 22;
  bool append_end = true;
  bool insert_hints = true;
};

struct HintSite {
  uint32_t address = 0;
  uint32_t static_count = 0;
  uint32_t count = 0;
  bool automatic = false;
};

struct AssembledProgram {
  std::vector<Instruction> instructions;
  std::map<std::string, uint32_t> labels;
  std::vector<HintSite> hints;
  // False when pre-execution ran out of budget and hint counts fell back to static counts.
  bool hints_exact = true;

  std::vector<uint8_t> image() const;
  std::optional<uint32_t> label_address(const std::string& name) const;
  // Disassembly with label lines.
  std::string listing() const;
};

struct ProgramItem {
  enum class Kind { Instruction, Label };
  Kind kind = Kind::Instruction;
  Instruction instruction;
  std::string label;
  // Branch target label; empty when the immediate is an absolute address.
  std::string target;
};

class Program {
 public:
  Program& append_ld(RegisterId rd, RegisterId base, int32_t offset);
  Program& append_st(RegisterId value, RegisterId base, int32_t offset);
  Program& append_and(RegisterId rd, RegisterId rs1, RegisterId rs2);
  Program& append_or(RegisterId rd, RegisterId rs1, RegisterId rs2);
  Program& append_xor(RegisterId rd, RegisterId rs1, RegisterId rs2);
  Program& append_add(RegisterId rd, RegisterId rs1, RegisterId rs2);
  Program& append_sub(RegisterId rd, RegisterId rs1, RegisterId rs2);
  Program& append_addi(RegisterId rd, RegisterId rs1, int32_t imm);
  Program& append_mv(RegisterId rd, RegisterId rs);
  Program& append_src(RegisterId rd, RegisterId amount);
  Program& append_li(RegisterId rd, int64_t imm);
  // Branch while rs1 < rs2 (unsigned).
  Program& append_bl(const std::string& label, RegisterId rs1, RegisterId rs2);
  // Loop form: branch while counter < bound. The bound is staged in R12.
  Program& append_bl(RegisterId counter, int64_t bound, const std::string& label);
  Program& append_beq(const std::string& label, RegisterId rs1, RegisterId rs2);
  Program& append_jump(const std::string& label);
  Program& append_sleep(uint32_t cycles);
  Program& append_ldwd(RegisterId source, uint32_t slice);
  Program& append_ldpc(RegisterId rd, PerfCounter counter);
  Program& append_sre();
  Program& append_srx();
  Program& append_hint(uint32_t reads);
  Program& append_end();

  // delay = NOP bus slots issued after the command before the next one.
  Program& append_act(RegisterId bank, bool inc_bank, RegisterId row, bool inc_row, uint32_t delay = 0);
  Program& append_pre(RegisterId bank, bool inc_bank, bool aux = false, uint32_t delay = 0);
  Program& append_prea(uint32_t delay = 0);
  Program& append_read(RegisterId bank, bool inc_bank, RegisterId col, bool inc_col, bool auto_precharge = false,
                       bool aux = false, uint32_t delay = 0);
  Program& append_write(RegisterId bank, bool inc_bank, RegisterId col, bool inc_col, bool auto_precharge = false,
                        bool aux = false, uint32_t delay = 0);
  Program& append_ref(uint32_t delay = 0);
  Program& append_zqs(uint32_t delay = 0);

  Program& append_regular(const RegularInstruction& instr, const std::string& target_label = {});
  Program& append_dram(const DramCommand& cmd, uint32_t delay = 0);
  // A fully formed DRAM instruction; no slot packing with neighbours.
  Program& append_dram_instruction(const DramInstruction& instr);
  Program& append_label(const std::string& name);

  // Items with any partially packed DRAM instruction flushed.
  std::vector<ProgramItem> items() const;

  AssembledProgram assemble(const AssemblyOptions& options = {}) const;

 private:
  void flush_pending();
  void push_instruction(const Instruction& instr, const std::string& target = {});

  std::vector<ProgramItem> items_;
  std::vector<std::string> label_names_;
  DramInstruction pending_{};
  // Slots of pending_ already consumed by commands or delay NOPs.
  int pending_used_ = 0;
};

}  // namespace dbender
