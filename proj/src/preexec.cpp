#include "dbender/preexec.hpp"

#include <array>
#include <bit>
#include <optional>

namespace dbender {

PreexecResult preexecute(const std::vector<Instruction>& program, uint64_t step_limit, size_t scratchpad_words) {
  PreexecResult result;
  std::array<uint32_t, 16> regs{};
  std::vector<uint32_t> scratch(scratchpad_words, 0);
  std::array<uint64_t, kPerfCounterCount> counters{};
  std::optional<uint32_t> active_hint;
  uint32_t reads_since_hint = 0;

  auto close_hint = [&] {
    if (active_hint) {
      auto& slot = result.hint_reads[*active_hint];
      slot = std::max(slot, reads_since_hint);
    }
    reads_since_hint = 0;
  };

  uint32_t pc = 0;
  while (result.steps < step_limit) {
    if (pc >= program.size()) break;
    ++result.steps;
    ++counters[0];
    const Instruction& instr = program[pc];
    if (const auto* d = std::get_if<DramInstruction>(&instr)) {
      for (const auto& c : d->slots) {
        switch (c.opcode) {
          case DramOpcode::ACT: ++counters[1]; break;
          case DramOpcode::READ: ++counters[2]; ++reads_since_hint; ++result.total_reads; break;
          case DramOpcode::WRITE: ++counters[3]; break;
          case DramOpcode::PRE:
          case DramOpcode::PREA: ++counters[4]; break;
          case DramOpcode::REF: ++counters[5]; break;
          default: break;
        }
        if (c.flags.inc_a && uses_reg_a(c.opcode)) regs[c.reg_a.index()] += regs[BASR.index()];
        if (c.flags.inc_b && uses_reg_b(c.opcode)) {
          regs[c.reg_b.index()] += regs[(c.opcode == DramOpcode::ACT ? RASR : CASR).index()];
        }
      }
      ++pc;
      continue;
    }
    const auto& r = std::get<RegularInstruction>(instr);
    const uint32_t a = regs[r.rs1.index() & 15];
    const uint32_t b = regs[r.rs2.index() & 15];
    const auto imm = static_cast<uint32_t>(r.imm);
    uint32_t next = pc + 1;
    switch (r.opcode) {
      case RegularOpcode::LD:
      case RegularOpcode::ST: {
        const uint32_t addr = a + imm;
        if (addr >= scratch.size()) {
          close_hint();
          result.completed = true;
          return result;
        }
        if (r.opcode == RegularOpcode::LD) regs[r.rd.index()] = scratch[addr];
        else scratch[addr] = b;
        break;
      }
      case RegularOpcode::AND: regs[r.rd.index()] = a & b; break;
      case RegularOpcode::OR: regs[r.rd.index()] = a | b; break;
      case RegularOpcode::XOR: regs[r.rd.index()] = a ^ b; break;
      case RegularOpcode::ADD: regs[r.rd.index()] = a + b; break;
      case RegularOpcode::SUB: regs[r.rd.index()] = a - b; break;
      case RegularOpcode::ADDI: regs[r.rd.index()] = a + imm; break;
      case RegularOpcode::MV: regs[r.rd.index()] = a; break;
      case RegularOpcode::SRC: regs[r.rd.index()] = std::rotr(regs[r.rd.index()], static_cast<int>(a & 31)); break;
      case RegularOpcode::LI: regs[r.rd.index()] = imm; break;
      case RegularOpcode::BL: if (a < b) next = imm; break;
      case RegularOpcode::BEQ: if (a == b) next = imm; break;
      case RegularOpcode::JUMP: next = imm; break;
      case RegularOpcode::LDPC:
        if (imm >= counters.size()) { result.completed = true; close_hint(); return result; }
        regs[r.rd.index()] = static_cast<uint32_t>(counters[imm]);
        break;
      case RegularOpcode::HINT:
        close_hint();
        active_hint = pc;
        break;
      case RegularOpcode::END:
        close_hint();
        result.completed = true;
        return result;
      default: break;
    }
    pc = next;
  }
  close_hint();
  result.completed = pc >= program.size();
  return result;
}

}  // namespace dbender
