#include "dbender/program.hpp"

#include <algorithm>
#include <sstream>

#include "dbender/error.hpp"
#include "dbender/preexec.hpp"

namespace dbender {

namespace {

void check_field_register(RegisterId r, const char* what) {
  if (!r.encodable()) fail(ErrorCode::InvalidRegister, std::string(what) + " cannot be " + register_name(r));
}

int32_t checked_imm(int64_t imm) {
  if (imm < INT32_MIN || imm > int64_t{UINT32_MAX}) {
    fail(ErrorCode::ImmOverflow, "immediate " + std::to_string(imm) + " does not fit in 32 bits");
  }
  return static_cast<int32_t>(static_cast<uint32_t>(imm));
}

bool is_hint(const Instruction& i) {
  const auto* r = std::get_if<RegularInstruction>(&i);
  return r && r->opcode == RegularOpcode::HINT;
}

bool is_end(const Instruction& i) {
  const auto* r = std::get_if<RegularInstruction>(&i);
  return r && r->opcode == RegularOpcode::END;
}

uint32_t count_reads(const DramInstruction& d) {
  return static_cast<uint32_t>(std::count_if(d.slots.begin(), d.slots.end(),
                                             [](const DramCommand& c) { return c.opcode == DramOpcode::READ; }));
}

}  // namespace

std::vector<uint8_t> AssembledProgram::image() const { return write_image(instructions); }

std::optional<uint32_t> AssembledProgram::label_address(const std::string& name) const {
  auto it = labels.find(name);
  if (it == labels.end()) return std::nullopt;
  return it->second;
}

std::string AssembledProgram::listing() const {
  std::multimap<uint32_t, std::string> by_address;
  for (const auto& [name, addr] : labels) by_address.emplace(addr, name);
  std::ostringstream os;
  for (uint32_t pc = 0; pc <= instructions.size(); ++pc) {
    auto [lo, hi] = by_address.equal_range(pc);
    for (auto it = lo; it != hi; ++it) os << it->second << ":\n";
    if (pc == instructions.size()) break;
    const Instruction& instr = instructions[pc];
    std::string text = disassemble(instr);
    if (const auto* r = std::get_if<RegularInstruction>(&instr); r && is_branch(r->opcode)) {
      auto target = by_address.find(static_cast<uint32_t>(r->imm));
      if (target != by_address.end()) {
        const std::string num = std::to_string(r->imm);
        text.replace(text.find(num), num.size(), target->second);
      }
    }
    os << "  " << text << "\n";
  }
  return os.str();
}

void Program::flush_pending() {
  if (pending_used_ == 0) return;
  ProgramItem item;
  item.instruction = pending_;
  items_.push_back(std::move(item));
  pending_ = {};
  pending_used_ = 0;
}

void Program::push_instruction(const Instruction& instr, const std::string& target) {
  flush_pending();
  ProgramItem item;
  item.instruction = instr;
  item.target = target;
  items_.push_back(std::move(item));
}

Program& Program::append_regular(const RegularInstruction& instr, const std::string& target_label) {
  const auto shape = operand_shape(instr.opcode);
  if (shape.rd && instr.opcode != RegularOpcode::LDWD) check_field_register(instr.rd, "rd");
  if (shape.rs1) check_field_register(instr.rs1, "rs1");
  if (shape.rs2) check_field_register(instr.rs2, "rs2");
  if (!target_label.empty() && !is_branch(instr.opcode)) {
    fail(ErrorCode::SyntaxError, std::string(mnemonic(instr.opcode)) + " does not take a label");
  }
  validate_instruction(instr);
  push_instruction(instr, target_label);
  return *this;
}

Program& Program::append_ld(RegisterId rd, RegisterId base, int32_t offset) {
  return append_regular(make_regular(RegularOpcode::LD, rd, base, R0, offset));
}

Program& Program::append_st(RegisterId value, RegisterId base, int32_t offset) {
  return append_regular(make_regular(RegularOpcode::ST, R0, base, value, offset));
}

Program& Program::append_and(RegisterId rd, RegisterId rs1, RegisterId rs2) {
  return append_regular(make_regular(RegularOpcode::AND, rd, rs1, rs2));
}

Program& Program::append_or(RegisterId rd, RegisterId rs1, RegisterId rs2) {
  return append_regular(make_regular(RegularOpcode::OR, rd, rs1, rs2));
}

Program& Program::append_xor(RegisterId rd, RegisterId rs1, RegisterId rs2) {
  return append_regular(make_regular(RegularOpcode::XOR, rd, rs1, rs2));
}

Program& Program::append_add(RegisterId rd, RegisterId rs1, RegisterId rs2) {
  return append_regular(make_regular(RegularOpcode::ADD, rd, rs1, rs2));
}

Program& Program::append_sub(RegisterId rd, RegisterId rs1, RegisterId rs2) {
  return append_regular(make_regular(RegularOpcode::SUB, rd, rs1, rs2));
}

Program& Program::append_addi(RegisterId rd, RegisterId rs1, int32_t imm) {
  return append_regular(make_regular(RegularOpcode::ADDI, rd, rs1, R0, imm));
}

Program& Program::append_mv(RegisterId rd, RegisterId rs) {
  return append_regular(make_regular(RegularOpcode::MV, rd, rs));
}

Program& Program::append_src(RegisterId rd, RegisterId amount) {
  return append_regular(make_regular(RegularOpcode::SRC, rd, amount));
}

Program& Program::append_li(RegisterId rd, int64_t imm) {
  return append_regular(make_regular(RegularOpcode::LI, rd, R0, R0, checked_imm(imm)));
}

Program& Program::append_bl(const std::string& label, RegisterId rs1, RegisterId rs2) {
  return append_regular(make_regular(RegularOpcode::BL, R0, rs1, rs2), label);
}

Program& Program::append_bl(RegisterId counter, int64_t bound, const std::string& label) {
  if (counter == R12) fail(ErrorCode::InvalidRegister, "R12 holds the loop bound and cannot be the counter");
  append_li(R12, bound);
  return append_bl(label, counter, R12);
}

Program& Program::append_beq(const std::string& label, RegisterId rs1, RegisterId rs2) {
  return append_regular(make_regular(RegularOpcode::BEQ, R0, rs1, rs2), label);
}

Program& Program::append_jump(const std::string& label) {
  return append_regular(make_regular(RegularOpcode::JUMP), label);
}

Program& Program::append_sleep(uint32_t cycles) {
  return append_regular(make_regular(RegularOpcode::SLEEP, R0, R0, R0, checked_imm(cycles)));
}

Program& Program::append_ldwd(RegisterId source, uint32_t slice) {
  if (slice >= kWdrSlices) fail(ErrorCode::ImmOverflow, "WDR slice " + std::to_string(slice));
  return append_regular(make_regular(RegularOpcode::LDWD, WDR, source, R0, static_cast<int32_t>(slice)));
}

Program& Program::append_ldpc(RegisterId rd, PerfCounter counter) {
  return append_regular(make_regular(RegularOpcode::LDPC, rd, R0, R0, static_cast<int32_t>(counter)));
}

Program& Program::append_sre() { return append_regular(make_regular(RegularOpcode::SRE)); }
Program& Program::append_srx() { return append_regular(make_regular(RegularOpcode::SRX)); }
Program& Program::append_end() { return append_regular(make_regular(RegularOpcode::END)); }

Program& Program::append_hint(uint32_t reads) {
  return append_regular(make_regular(RegularOpcode::HINT, R0, R0, R0, checked_imm(reads)));
}

Program& Program::append_dram(const DramCommand& cmd, uint32_t delay) {
  if (uses_reg_a(cmd.opcode)) check_field_register(cmd.reg_a, "bank register");
  if (uses_reg_b(cmd.opcode)) check_field_register(cmd.reg_b, "address register");
  DramInstruction probe;
  probe.slots[0] = cmd;
  validate_instruction(probe);

  if (pending_used_ == kSlotsPerInstruction) flush_pending();
  pending_.slots[pending_used_++] = cmd;

  if (delay > kMaxNopDelaySlots) {
    const uint32_t rest = delay - static_cast<uint32_t>(kSlotsPerInstruction - pending_used_);
    pending_used_ = kSlotsPerInstruction;
    flush_pending();
    if (rest / 4 > 0) push_instruction(make_regular(RegularOpcode::SLEEP, R0, R0, R0, checked_imm(rest / 4)));
    pending_used_ = static_cast<int>(rest % 4);
    return *this;
  }
  uint32_t rest = delay;
  while (rest > 0) {
    if (pending_used_ == kSlotsPerInstruction) flush_pending();
    const uint32_t take = std::min<uint32_t>(rest, kSlotsPerInstruction - pending_used_);
    pending_used_ += static_cast<int>(take);
    rest -= take;
  }
  return *this;
}

Program& Program::append_dram_instruction(const DramInstruction& instr) {
  for (const auto& c : instr.slots) {
    if (uses_reg_a(c.opcode)) check_field_register(c.reg_a, "bank register");
    if (uses_reg_b(c.opcode)) check_field_register(c.reg_b, "address register");
  }
  validate_instruction(instr);
  push_instruction(instr);
  return *this;
}

Program& Program::append_act(RegisterId bank, bool inc_bank, RegisterId row, bool inc_row, uint32_t delay) {
  return append_dram(make_act(bank, inc_bank, row, inc_row), delay);
}

Program& Program::append_pre(RegisterId bank, bool inc_bank, bool aux, uint32_t delay) {
  return append_dram(make_pre(bank, inc_bank, aux), delay);
}

Program& Program::append_prea(uint32_t delay) { return append_dram(make_prea(), delay); }

Program& Program::append_read(RegisterId bank, bool inc_bank, RegisterId col, bool inc_col, bool ap, bool aux,
                              uint32_t delay) {
  return append_dram(make_read(bank, inc_bank, col, inc_col, ap, aux), delay);
}

Program& Program::append_write(RegisterId bank, bool inc_bank, RegisterId col, bool inc_col, bool ap, bool aux,
                               uint32_t delay) {
  return append_dram(make_write(bank, inc_bank, col, inc_col, ap, aux), delay);
}

Program& Program::append_ref(uint32_t delay) { return append_dram(make_ref(), delay); }
Program& Program::append_zqs(uint32_t delay) { return append_dram(make_zqs(), delay); }

Program& Program::append_label(const std::string& name) {
  if (name.empty()) fail(ErrorCode::SyntaxError, "empty label");
  if (std::find(label_names_.begin(), label_names_.end(), name) != label_names_.end()) {
    fail(ErrorCode::DuplicateLabel, name);
  }
  flush_pending();
  label_names_.push_back(name);
  ProgramItem item;
  item.kind = ProgramItem::Kind::Label;
  item.label = name;
  items_.push_back(std::move(item));
  return *this;
}

std::vector<ProgramItem> Program::items() const {
  std::vector<ProgramItem> out = items_;
  if (pending_used_ > 0) {
    ProgramItem item;
    item.instruction = pending_;
    out.push_back(std::move(item));
  }
  return out;
}

AssembledProgram Program::assemble(const AssemblyOptions& options) const {
  const std::vector<ProgramItem> source = items();

  // Hint insertion: one HINT ahead of every READ-carrying DRAM run, hoisted above
  // labels that lead into the run so branches back to the label skip it.
  std::vector<ProgramItem> seq;
  std::vector<bool> auto_hint;
  std::vector<uint32_t> static_reads;
  std::vector<ProgramItem> held_labels;
  const ProgramItem* last_instr = nullptr;
  for (size_t i = 0; i < source.size(); ++i) {
    const ProgramItem& item = source[i];
    if (item.kind == ProgramItem::Kind::Label) {
      held_labels.push_back(item);
      continue;
    }
    const auto* dram = std::get_if<DramInstruction>(&item.instruction);
    const bool run_start =
        dram && (!held_labels.empty() || last_instr == nullptr || !is_dram(last_instr->instruction));
    if (options.insert_hints && run_start) {
      uint32_t reads = 0;
      for (size_t j = i; j < source.size() && source[j].kind == ProgramItem::Kind::Instruction; ++j) {
        const auto* d = std::get_if<DramInstruction>(&source[j].instruction);
        if (!d) break;
        reads += count_reads(*d);
      }
      const bool already_hinted = last_instr && is_hint(last_instr->instruction);
      if (reads > 0 && !already_hinted) {
        ProgramItem hint;
        hint.instruction = make_regular(RegularOpcode::HINT, R0, R0, R0, static_cast<int32_t>(reads));
        seq.push_back(hint);
        auto_hint.push_back(true);
        static_reads.push_back(reads);
      }
    }
    for (auto& l : held_labels) {
      seq.push_back(l);
      auto_hint.push_back(false);
      static_reads.push_back(0);
    }
    held_labels.clear();
    seq.push_back(item);
    auto_hint.push_back(false);
    static_reads.push_back(0);
    last_instr = &item;
  }
  const bool needs_end = options.append_end && (last_instr == nullptr || !is_end(last_instr->instruction));
  for (auto& l : held_labels) {
    seq.push_back(l);
    auto_hint.push_back(false);
    static_reads.push_back(0);
  }
  if (needs_end) {
    ProgramItem end;
    end.instruction = make_regular(RegularOpcode::END);
    seq.push_back(end);
    auto_hint.push_back(false);
    static_reads.push_back(0);
  }

  AssembledProgram out;
  uint32_t address = 0;
  for (const auto& item : seq) {
    if (item.kind == ProgramItem::Kind::Label) out.labels[item.label] = address;
    else ++address;
  }
  if (address > options.capacity) {
    fail(ErrorCode::ProgramTooLarge,
         std::to_string(address) + " instructions exceed capacity " + std::to_string(options.capacity));
  }

  bool any_reads = false;
  for (size_t k = 0; k < seq.size(); ++k) {
    const auto& item = seq[k];
    if (item.kind == ProgramItem::Kind::Label) continue;
    Instruction instr = item.instruction;
    if (!item.target.empty()) {
      auto it = out.labels.find(item.target);
      if (it == out.labels.end()) fail(ErrorCode::UndefinedLabel, item.target);
      std::get<RegularInstruction>(instr).imm = static_cast<int32_t>(it->second);
    }
    if (is_hint(instr)) {
      HintSite site;
      site.address = static_cast<uint32_t>(out.instructions.size());
      site.automatic = auto_hint[k];
      site.static_count = auto_hint[k] ? static_reads[k]
                                       : static_cast<uint32_t>(std::get<RegularInstruction>(instr).imm);
      site.count = site.static_count;
      out.hints.push_back(site);
    }
    if (const auto* d = std::get_if<DramInstruction>(&instr)) any_reads |= count_reads(*d) > 0;
    out.instructions.push_back(instr);
  }

  const bool has_auto = std::any_of(out.hints.begin(), out.hints.end(), [](const HintSite& h) { return h.automatic; });
  if (has_auto && any_reads) {
    const PreexecResult pre = preexecute(out.instructions, options.preexec_step_limit, options.scratchpad_words);
    out.hints_exact = pre.completed;
    for (auto& site : out.hints) {
      if (!site.automatic) continue;
      auto it = pre.hint_reads.find(site.address);
      if (it == pre.hint_reads.end()) continue;
      site.count = pre.completed ? it->second : std::max(site.static_count, it->second);
    }
  }
  for (const auto& site : out.hints) {
    if (site.count > options.fifo_capacity) {
      fail(ErrorCode::ReadRunExceedsFifo, "HINT at " + std::to_string(site.address) + " covers " +
                                              std::to_string(site.count) + " reads, FIFO holds " +
                                              std::to_string(options.fifo_capacity));
    }
    std::get<RegularInstruction>(out.instructions[site.address]).imm = static_cast<int32_t>(site.count);
  }
  return out;
}

}  // namespace dbender
