#include "dbender/core.hpp"

#include <bit>
#include <climits>

namespace dbender {

std::string_view stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::None: return "none";
    case StopReason::End: return "end";
    case StopReason::Trap: return "trap";
    case StopReason::MaxCycles: return "max_cycles";
    case StopReason::Breakpoint: return "breakpoint";
    case StopReason::StepLimit: return "step_limit";
    case StopReason::AlreadyHalted: return "already_halted";
  }
  return "?";
}

std::string trace_csv_line(const IssuedCommand& c) {
  std::string line = "slot," + std::to_string(c.slot) + ",";
  line += mnemonic(c.cmd.opcode);
  line += ",";
  line += c.cmd.bank == kAllBanks ? std::string("all") : std::to_string(c.cmd.bank);
  line += ",";
  const bool addressed =
      c.cmd.opcode == DramOpcode::ACT || c.cmd.opcode == DramOpcode::READ || c.cmd.opcode == DramOpcode::WRITE;
  line += addressed ? std::to_string(c.cmd.address) : std::string("-");
  return line;
}

Core::Core(size_t instruction_capacity, size_t scratchpad_words) : capacity_(instruction_capacity) {
  state_.scratchpad.assign(scratchpad_words, 0);
}

void Core::load_program(std::span<const uint8_t> image, bool reset_counters) {
  const auto words = read_image_words(image);
  if (words.size() > capacity_) {
    fail(ErrorCode::ProgramTooLarge, std::to_string(words.size()) + " instructions, capacity " + std::to_string(capacity_));
  }
  std::vector<Instruction> program;
  std::map<uint32_t, std::string> bad;
  program.reserve(words.size());
  for (size_t i = 0; i < words.size(); ++i) {
    try {
      program.push_back(decode_instruction(words[i]));
    } catch (const Error& e) {
      bad[static_cast<uint32_t>(i)] = e.what();
      program.push_back(make_regular(RegularOpcode::END));
    }
  }
  load_program(std::move(program), reset_counters);
  undecodable_ = std::move(bad);
}

void Core::load_program(std::vector<Instruction> program, bool reset_counters) {
  if (program.size() > capacity_) {
    fail(ErrorCode::ProgramTooLarge, std::to_string(program.size()) + " instructions, capacity " + std::to_string(capacity_));
  }
  program_ = std::move(program);
  undecodable_.clear();
  if (reset_counters) reset();
  state_.pc = 0;
  state_.halted = false;
  state_.stalled_on_hint.reset();
  state_.read_budget = 0;
  state_.load_dest.reset();
  report_ = RunReport{};
  start_.cycle = state_.cycle;
  start_.bus_slot = state_.bus_slot;
  start_.instructions = state_.instructions;
  start_.stall_cycles = state_.stall_cycles;
}

void Core::reset() {
  const size_t words = state_.scratchpad.size();
  state_ = CoreState{};
  state_.scratchpad.assign(words, 0);
  report_ = RunReport{};
  start_ = CoreState{};
}

uint32_t Core::read_perf_counter(uint32_t id) const {
  if (id >= kPerfCounterCount) fail(ErrorCode::UnknownCounter, "counter " + std::to_string(id));
  if (id == static_cast<uint32_t>(PerfCounter::Cycles)) return static_cast<uint32_t>(state_.cycle);
  return static_cast<uint32_t>(state_.perf[id]);
}

void Core::advance(Machine& m, uint64_t cycles) {
  state_.cycle += cycles;
  m.drain.advance(m.fifo, cycles);
}

void Core::trap(ErrorCode code, const std::string& message) {
  state_.halted = true;
  report_.stop = StopReason::Trap;
  report_.trap_code = code;
  report_.trap_message = message;
}

void Core::inject(Machine& m, PeriodicOp op) {
  const int64_t base = static_cast<int64_t>(state_.cycle) * 4;
  for (const CannedCommand& c : m.scheduler->program(op)) {
    const uint64_t before = m.device.violation_count();
    m.device.apply_command(c.cmd, base + c.offset);
    report_.violations += m.device.violation_count() - before;
    if (m.trace && *m.trace) (*m.trace)(IssuedCommand{base + c.offset, c.cmd, true});
  }
  report_.injections.push_back({op, base});
  m.scheduler->complete(op);
  advance(m, static_cast<uint64_t>((m.scheduler->span_slots(op) + 3) / 4));
}

void Core::maybe_inject(Machine& m) {
  if (!m.scheduler || m.device.self_refresh() || state_.read_budget > 0) return;
  while (auto op = m.scheduler->due(static_cast<int64_t>(state_.cycle) * 4)) {
    const uint64_t start = state_.cycle;
    inject(m, *op);
    state_.stall_cycles += state_.cycle - start;
  }
}

void Core::sleep(Machine& m, uint64_t cycles) {
  const uint64_t end = state_.cycle + cycles;
  while (m.scheduler && !m.device.self_refresh() && state_.read_budget == 0) {
    const int64_t due = m.scheduler->next_due();
    if (due == INT64_MAX) break;
    const auto at = static_cast<uint64_t>((due + 3) / 4);
    if (at >= end) break;
    if (at > state_.cycle) advance(m, at - state_.cycle);
    while (auto op = m.scheduler->due(static_cast<int64_t>(state_.cycle) * 4)) inject(m, *op);
  }
  if (state_.cycle < end) {
    advance(m, end - state_.cycle);
  } else {
    state_.stall_cycles += state_.cycle - end;
  }
}

void Core::issue(Machine& m, const DramCommand& c, int64_t slot) {
  DeviceCommand dc;
  dc.opcode = c.opcode;
  dc.flags = c.flags;
  dc.pc = state_.pc;
  auto& regs = state_.regs;
  const bool device_wide = c.opcode == DramOpcode::PREA || c.opcode == DramOpcode::REF || c.opcode == DramOpcode::ZQS;
  dc.bank = device_wide ? kAllBanks : regs[c.reg_a.index()];
  if (uses_reg_b(c.opcode)) dc.address = regs[c.reg_b.index()];

  const uint64_t before = m.device.violation_count();
  const CommandEvents ev = m.device.apply_command(dc, slot, c.opcode == DramOpcode::WRITE ? &state_.wdr : nullptr);
  report_.violations += m.device.violation_count() - before;

  switch (c.opcode) {
    case DramOpcode::ACT: ++state_.perf[static_cast<size_t>(PerfCounter::ActsIssued)]; break;
    case DramOpcode::READ: ++state_.perf[static_cast<size_t>(PerfCounter::ReadsIssued)]; break;
    case DramOpcode::WRITE: ++state_.perf[static_cast<size_t>(PerfCounter::WritesIssued)]; break;
    case DramOpcode::PRE:
    case DramOpcode::PREA: ++state_.perf[static_cast<size_t>(PerfCounter::PresIssued)]; break;
    case DramOpcode::REF: ++state_.perf[static_cast<size_t>(PerfCounter::RefsIssued)]; break;
    default: break;
  }
  switch (c.opcode) {
    case DramOpcode::ACT: ++report_.histogram[static_cast<size_t>(CommandClass::ACT)]; break;
    case DramOpcode::PRE:
    case DramOpcode::PREA: ++report_.histogram[static_cast<size_t>(CommandClass::PRE)]; break;
    case DramOpcode::READ: ++report_.histogram[static_cast<size_t>(CommandClass::READ)]; break;
    case DramOpcode::WRITE: ++report_.histogram[static_cast<size_t>(CommandClass::WRITE)]; break;
    case DramOpcode::REF: ++report_.histogram[static_cast<size_t>(CommandClass::REF)]; break;
    case DramOpcode::ZQS: ++report_.histogram[static_cast<size_t>(CommandClass::ZQS)]; break;
    case DramOpcode::NOP: break;
  }
  if (c.opcode == DramOpcode::READ && ev.has_data) {
    m.fifo.push(ev.data);
    ++report_.transfers;
    if (state_.read_budget > 0) --state_.read_budget;
  }
  if (c.flags.inc_a && uses_reg_a(c.opcode)) regs[c.reg_a.index()] += regs[BASR.index()];
  if (c.flags.inc_b && uses_reg_b(c.opcode)) {
    regs[c.reg_b.index()] += regs[(c.opcode == DramOpcode::ACT ? RASR : CASR).index()];
  }
  if (m.trace && *m.trace) (*m.trace)(IssuedCommand{slot, dc, false});
}

void Core::exec_dram(Machine& m, const DramInstruction& d) {
  const int64_t base = static_cast<int64_t>(state_.cycle) * 4;
  for (int i = 0; i < kSlotsPerInstruction; ++i) {
    if (d.slots[i].opcode != DramOpcode::NOP) issue(m, d.slots[i], base + i);
  }
  state_.bus_slot += kSlotsPerInstruction;
  advance(m, 1);
  ++state_.pc;
}

void Core::exec_regular(Machine& m, const RegularInstruction& r) {
  auto& regs = state_.regs;
  const uint32_t a = regs[r.rs1.index() & 15];
  const uint32_t b = regs[r.rs2.index() & 15];
  const auto imm = static_cast<uint32_t>(r.imm);
  const uint8_t rd = r.rd.index();
  uint32_t next = state_.pc + 1;
  uint64_t cost = 1;
  switch (r.opcode) {
    case RegularOpcode::LD:
    case RegularOpcode::ST: {
      const uint32_t addr = a + imm;
      if (addr >= state_.scratchpad.size()) {
        fail(ErrorCode::ScratchpadOutOfRange, "scratchpad address " + std::to_string(addr));
      }
      if (r.opcode == RegularOpcode::LD) {
        regs[rd] = state_.scratchpad[addr];
        state_.load_dest = rd;
      } else {
        state_.scratchpad[addr] = b;
      }
      break;
    }
    case RegularOpcode::AND: regs[rd] = a & b; break;
    case RegularOpcode::OR: regs[rd] = a | b; break;
    case RegularOpcode::XOR: regs[rd] = a ^ b; break;
    case RegularOpcode::ADD: regs[rd] = a + b; break;
    case RegularOpcode::SUB: regs[rd] = a - b; break;
    case RegularOpcode::ADDI: regs[rd] = a + imm; break;
    case RegularOpcode::MV: regs[rd] = a; break;
    case RegularOpcode::SRC: regs[rd] = std::rotr(regs[rd], static_cast<int>(a & 31)); break;
    case RegularOpcode::LI: regs[rd] = imm; break;
    case RegularOpcode::BL:
      if (a < b) next = imm;
      cost = kBranchCycles;
      break;
    case RegularOpcode::BEQ:
      if (a == b) next = imm;
      cost = kBranchCycles;
      break;
    case RegularOpcode::JUMP:
      next = imm;
      cost = kBranchCycles;
      break;
    case RegularOpcode::SLEEP:
      sleep(m, imm);
      cost = 0;
      break;
    case RegularOpcode::LDWD: {
      const uint32_t slice = imm & (kWdrSlices - 1);
      uint64_t& word = state_.wdr[slice / 2];
      const unsigned shift = (slice % 2) * 32;
      word = (word & ~(uint64_t{0xFFFFFFFF} << shift)) | (uint64_t{a} << shift);
      break;
    }
    case RegularOpcode::LDPC: regs[rd] = read_perf_counter(imm); break;
    case RegularOpcode::SRE:
      m.device.set_self_refresh(true, static_cast<int64_t>(state_.cycle) * 4);
      break;
    case RegularOpcode::SRX:
      m.device.set_self_refresh(false, static_cast<int64_t>(state_.cycle) * 4);
      if (m.scheduler) m.scheduler->skip_until(static_cast<int64_t>(state_.cycle) * 4);
      break;
    case RegularOpcode::HINT:
      cost = 0;
      state_.read_budget = 0;
      if (!m.fifo.admits(imm)) {
        if (m.drain.numerator() == 0) fail(ErrorCode::MaxCyclesExceeded, "readback FIFO never drains");
        state_.stalled_on_hint = imm;
        while (!m.fifo.admits(imm)) {
          advance(m, 1);
          ++state_.stall_cycles;
        }
        state_.stalled_on_hint.reset();
      }
      state_.read_budget = imm;
      break;
    case RegularOpcode::END:
      cost = kPipelineDrainCycles;
      state_.read_budget = 0;
      state_.halted = true;
      report_.stop = StopReason::End;
      next = state_.pc;
      break;
  }
  if (cost) advance(m, cost);
  state_.pc = next;
}

bool Core::reads_load_dest(const Instruction& instr) const {
  const uint8_t d = *state_.load_dest;
  if (const auto* r = std::get_if<RegularInstruction>(&instr)) {
    const OperandShape s = operand_shape(r->opcode);
    if (s.rs1 && r->rs1.index() == d) return true;
    if (s.rs2 && r->rs2.index() == d) return true;
    return r->opcode == RegularOpcode::SRC && r->rd.index() == d;
  }
  for (const auto& c : std::get<DramInstruction>(instr).slots) {
    if (uses_reg_a(c.opcode) && (c.reg_a.index() == d || (c.flags.inc_a && d == BASR.index()))) return true;
    if (uses_reg_b(c.opcode)) {
      if (c.reg_b.index() == d) return true;
      const RegisterId stride = c.opcode == DramOpcode::ACT ? RASR : CASR;
      if (c.flags.inc_b && d == stride.index()) return true;
    }
  }
  return false;
}

StepEvents Core::step(Machine& m) {
  StepEvents ev;
  ev.pc = state_.pc;
  if (state_.halted) {
    ev.stop = StopReason::AlreadyHalted;
    return ev;
  }
  const uint64_t start_cycle = state_.cycle;
  const uint64_t start_violations = report_.violations;
  uint64_t issued_before = 0;
  for (uint64_t h : report_.histogram) issued_before += h;

  try {
    if (state_.pc >= program_.size()) fail(ErrorCode::DecodeTrap, "pc " + std::to_string(state_.pc) + " outside program");
    if (auto it = undecodable_.find(state_.pc); it != undecodable_.end()) fail(ErrorCode::DecodeTrap, it->second);
    const Instruction& instr = program_[state_.pc];
    if (state_.load_dest && reads_load_dest(instr)) {
      advance(m, 1);
      ++state_.stall_cycles;
    }
    state_.load_dest.reset();
    if (const auto* d = std::get_if<DramInstruction>(&instr)) {
      exec_dram(m, *d);
    } else {
      maybe_inject(m);
      exec_regular(m, std::get<RegularInstruction>(instr));
    }
    ++state_.instructions;
  } catch (const Error& e) {
    trap(e.code(), e.what());
  }

  uint64_t issued_after = 0;
  for (uint64_t h : report_.histogram) issued_after += h;
  ev.cycles = state_.cycle - start_cycle;
  ev.commands = static_cast<uint32_t>(issued_after - issued_before);
  ev.violations = static_cast<uint32_t>(report_.violations - start_violations);
  if (state_.halted) ev.stop = report_.stop;
  return ev;
}

RunReport Core::run(Machine& m, uint64_t max_cycles) {
  while (!state_.halted) {
    if (state_.cycle - start_.cycle >= max_cycles) {
      report_.stop = StopReason::MaxCycles;
      report_.max_cycles_exceeded = true;
      break;
    }
    step(m);
  }
  return summarize(m);
}

RunReport Core::summarize(const Machine& m) const {
  RunReport r = report_;
  r.cycles = state_.cycle - start_.cycle;
  r.bus_slots = state_.bus_slot - start_.bus_slot;
  r.instructions = state_.instructions - start_.instructions;
  r.fifo_high_water = m.fifo.high_water();
  r.fifo_overflows = m.fifo.overflows();
  r.stall_cycles = state_.stall_cycles - start_.stall_cycles;
  return r;
}

}  // namespace dbender
