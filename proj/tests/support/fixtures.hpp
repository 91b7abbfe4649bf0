#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dbender/config.hpp"
#include "dbender/isa.hpp"
#include "dbender/program.hpp"

namespace dbender::testkit {

// Reads every cache block of bank 0, row 0.
inline Program read_row_program() {
  Program p;
  p.append_li(R5, 0);
  p.append_li(R4, 0);
  p.append_li(R3, 0);
  p.append_li(CASR, 8);
  p.append_li(R6, 1024);
  p.append_act(R5, false, R4, false, 11);
  p.append_label("read");
  p.append_read(R5, false, R3, true, false, false, 0);
  p.append_bl("read", R3, R6);
  p.append_pre(R5, false, false, 0);
  return p;
}

inline const char* kReadRowText = R"(# bank 0, row 0
LI R5, 0
LI R4, 0
LI R3, 0
LI CASR, 8
LI R6, 1024
ACT R5, R4 | NOP | NOP | NOP
NOP4
NOP4
read:
READ R5, R3+ | NOP | NOP | NOP
BL read, R3, R6
PRE R5
)";

inline PlatformConfig ddr4() { return load_config("ddr4_default"); }

// ddr4_default with an error-free majority operation on the three listed timing pairs.
inline PlatformConfig exact_majority_config() {
  PlatformConfig c = ddr4();
  c.fault.majority.valid_timings = {{1.5, 1.5}, {1.5, 3.0}, {3.0, 1.5}};
  c.fault.majority.and_error = {};
  c.fault.majority.or_gap = {};
  c.fault.rowhammer.enabled = false;
  return c;
}

inline DramCommand random_command(std::mt19937_64& rng) {
  DramCommand c;
  c.opcode = static_cast<DramOpcode>(rng() % kDramOpcodeCount);
  if (c.opcode == DramOpcode::NOP) return c;
  if (uses_reg_a(c.opcode)) {
    c.reg_a = RegisterId(static_cast<uint8_t>(rng() % 16));
    c.flags.inc_a = rng() & 1;
  }
  if (uses_reg_b(c.opcode)) {
    c.reg_b = RegisterId(static_cast<uint8_t>(rng() % 16));
    c.flags.inc_b = rng() & 1;
  }
  c.flags.auto_precharge = rng() & 1;
  c.flags.aux = rng() & 1;
  return c;
}

inline Instruction random_instruction(std::mt19937_64& rng) {
  if (rng() % 2) {
    DramInstruction d;
    for (auto& s : d.slots) s = random_command(rng);
    return d;
  }
  static const std::vector<RegularOpcode> ops = {
      RegularOpcode::LD,   RegularOpcode::ST,    RegularOpcode::AND,  RegularOpcode::OR,  RegularOpcode::XOR,
      RegularOpcode::ADD,  RegularOpcode::SUB,   RegularOpcode::ADDI, RegularOpcode::MV,  RegularOpcode::SRC,
      RegularOpcode::LI,   RegularOpcode::BL,    RegularOpcode::BEQ,  RegularOpcode::JUMP, RegularOpcode::SLEEP,
      RegularOpcode::LDWD, RegularOpcode::LDPC,  RegularOpcode::SRE,  RegularOpcode::SRX, RegularOpcode::END,
      RegularOpcode::HINT};
  RegularInstruction r;
  r.opcode = ops[rng() % ops.size()];
  const OperandShape s = operand_shape(r.opcode);
  auto reg = [&] { return RegisterId(static_cast<uint8_t>(rng() % 16)); };
  if (s.rd) r.rd = reg();
  if (s.rs1) r.rs1 = reg();
  if (s.rs2) r.rs2 = reg();
  if (s.imm) r.imm = static_cast<int32_t>(static_cast<uint32_t>(rng()));
  if (r.opcode == RegularOpcode::LDWD) {
    r.rd = WDR;
    r.imm = static_cast<int32_t>(rng() % kWdrSlices);
  }
  if (r.opcode == RegularOpcode::SLEEP || r.opcode == RegularOpcode::HINT) r.imm &= 0x7FFFFFFF;
  return r;
}

// Forward-only control flow. Every branch is bracketed by cycle counter reads;
// the difference lands in sp[k] for branch k.
inline Program random_branch_program(std::mt19937_64& rng, int branches) {
  Program p;
  p.append_li(R11, 0);
  for (int r = 1; r <= 6; ++r) p.append_li(RegisterId(static_cast<uint8_t>(r)), static_cast<int64_t>(rng() % 4));
  for (int k = 0; k < branches; ++k) {
    const std::string target = "T" + std::to_string(k), join = "J" + std::to_string(k);
    const auto a = RegisterId(static_cast<uint8_t>(1 + rng() % 6));
    const auto b = RegisterId(static_cast<uint8_t>(1 + rng() % 6));
    p.append_ldpc(R10, PerfCounter::Cycles);
    switch (rng() % 3) {
      case 0: p.append_bl(target, a, b); break;
      case 1: p.append_beq(target, a, b); break;
      default: p.append_jump(target); break;
    }
    p.append_ldpc(R9, PerfCounter::Cycles);
    p.append_jump(join);
    const int filler = static_cast<int>(rng() % 4);
    for (int f = 0; f < filler; ++f) {
      if (rng() % 2) {
        p.append_addi(R7, R7, 1);
      } else {
        p.append_dram_instruction(DramInstruction{});
      }
    }
    p.append_label(target);
    p.append_ldpc(R9, PerfCounter::Cycles);
    p.append_label(join);
    p.append_sub(R8, R9, R10);
    p.append_st(R8, R11, k);
    if (rng() % 2) p.append_addi(a, a, static_cast<int32_t>(rng() % 3));
  }
  return p;
}

// Straight-line code and bounded loops with DRAM runs, small enough that the
// FIFO never fills. Registers: R0-R5 data, R6 loop counter, R8 column,
// R9 bank, R10 row, R11 zero.
inline Program random_mixed_program(std::mt19937_64& rng) {
  Program p;
  p.append_li(R11, 0).append_li(BASR, 0).append_li(RASR, 1).append_li(CASR, 8);
  p.append_li(R9, static_cast<int64_t>(rng() % 16));
  auto data = [&] { return RegisterId(static_cast<uint8_t>(rng() % 6)); };
  int loops = 0;
  int reads = 0;
  auto block = [&](bool allow_loop, auto&& self) -> void {
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      switch (rng() % 10) {
        case 0: p.append_add(data(), data(), data()); break;
        case 1: p.append_xor(data(), data(), data()); break;
        case 2: p.append_addi(data(), data(), static_cast<int32_t>(rng() % 100) - 50); break;
        case 3: p.append_li(data(), static_cast<int64_t>(rng() % 1000)); break;
        case 4: {
          const auto d = data();
          p.append_ld(d, R11, static_cast<int32_t>(rng() % 1024));
          if (rng() % 2) p.append_addi(d, d, 1);
          break;
        }
        case 5: p.append_st(data(), R11, static_cast<int32_t>(rng() % 1024)); break;
        case 6: p.append_sleep(static_cast<uint32_t>(rng() % 20)); break;
        case 7: p.append_ldpc(data(), static_cast<PerfCounter>(rng() % kPerfCounterCount)); break;
        case 8: {
          if (allow_loop && loops < 3) {
            const std::string label = "L" + std::to_string(loops++);
            const int count = 1 + static_cast<int>(rng() % 4);
            p.append_li(R6, 0);
            p.append_label(label);
            self(false, self);
            p.append_addi(R6, R6, 1);
            p.append_bl(R6, count, label);
          } else {
            p.append_src(data(), data());
          }
          break;
        }
        default: {
          if (reads > 100) break;
          p.append_li(R8, 0).append_li(R10, static_cast<int64_t>(rng() % 30000));
          const int cmds = 1 + static_cast<int>(rng() % 8);
          for (int c = 0; c < cmds; ++c) {
            const uint32_t delay = static_cast<uint32_t>(rng() % 6);
            switch (rng() % 6) {
              case 0: p.append_act(R9, false, R10, rng() & 1, delay); break;
              case 1: p.append_pre(R9, false, false, delay); break;
              case 2: p.append_read(R9, false, R8, true, false, false, delay); ++reads; break;
              case 3: p.append_write(R9, false, R8, true, false, false, delay); break;
              case 4: p.append_ref(delay); break;
              default: p.append_prea(delay); break;
            }
          }
          p.append_addi(R0, R0, 1);
        }
      }
    }
  };
  block(true, block);
  return p;
}

// READ-heavy program: several rows read in loops of up to 512 READs per
// hint-guarded run, interleaved with regular work.
inline Program random_read_program(std::mt19937_64& rng) {
  Program p;
  p.append_li(R11, 0).append_li(CASR, 0).append_li(R9, static_cast<int64_t>(rng() % 16));
  const int rows = 1 + static_cast<int>(rng() % 4);
  for (int r = 0; r < rows; ++r) {
    const std::string label = "R" + std::to_string(r);
    const int per_instr = 1 + static_cast<int>(rng() % 4);
    const int instrs = 1 + static_cast<int>(rng() % 3);
    const int max_iter = 512 / (per_instr * instrs);
    const int iters = 1 + static_cast<int>(rng() % max_iter);
    p.append_li(R8, 0).append_li(R10, static_cast<int64_t>(rng() % 32768)).append_li(R6, 0);
    p.append_act(R9, false, R10, false, 11);
    p.append_label(label);
    for (int i = 0; i < instrs; ++i) {
      DramInstruction d;
      for (int s = 0; s < per_instr; ++s) d.slots[s] = make_read(R9, false, R8, true);
      p.append_dram_instruction(d);
    }
    p.append_addi(R6, R6, 1);
    p.append_bl(R6, iters, label);
    p.append_pre(R9, false, false, 8);
    if (rng() % 2) p.append_sleep(static_cast<uint32_t>(rng() % 200));
    if (rng() % 2) p.append_addi(R0, R0, 1);
  }
  return p;
}

}  // namespace dbender::testkit
