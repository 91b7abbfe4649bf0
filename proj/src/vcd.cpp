#include "dbender/vcd.hpp"

#include <cmath>
#include <string>

namespace dbender {

namespace {

std::string bank_id(uint32_t b) { return "b" + std::to_string(b); }

}  // namespace

VcdWriter::VcdWriter(std::ostream& out, uint32_t banks, double bus_slot_ns)
    : out_(out), banks_(banks), slot_ps_(std::llround(bus_slot_ns * 1000.0)), phase_(banks, -1) {
  out_ << "$timescale 1ps $end\n$scope module dram $end\n";
  out_ << "$var wire 3 c cmd $end\n";
  out_ << "$var wire 16 f fifo_occupancy $end\n";
  for (uint32_t b = 0; b < banks_; ++b) out_ << "$var wire 2 " << bank_id(b) << " bank" << b << "_phase $end\n";
  out_ << "$upscope $end\n$enddefinitions $end\n#0\n";
  emit_vector(0, 3, "c");
  emit_vector(0, 16, "f");
  for (uint32_t b = 0; b < banks_; ++b) {
    emit_vector(0, 2, bank_id(b));
    phase_[b] = 0;
  }
  last_time_ = 0;
  fifo_level_ = 0;
}

void VcdWriter::emit_vector(uint64_t value, int width, const std::string& id) {
  std::string bits(width, '0');
  for (int i = 0; i < width; ++i) {
    if ((value >> i) & 1) bits[width - 1 - i] = '1';
  }
  out_ << 'b' << bits << ' ' << id << '\n';
}

void VcdWriter::at(int64_t slot, bool command_follows) {
  const int64_t t = slot * slot_ps_;
  if (t <= last_time_) return;
  if (cmd_pending_) {
    // The bus returns to NOP one slot after a command.
    const int64_t idle = last_time_ + slot_ps_;
    cmd_pending_ = false;
    if (idle < t || !command_follows) {
      out_ << '#' << idle << '\n';
      emit_vector(0, 3, "c");
      last_time_ = idle;
      if (idle == t) return;
    }
  }
  out_ << '#' << t << '\n';
  last_time_ = t;
}

void VcdWriter::command(const IssuedCommand& c, const DramDevice& device) {
  at(c.slot, true);
  emit_vector(static_cast<uint64_t>(c.cmd.opcode), 3, "c");
  cmd_pending_ = true;
  for (uint32_t b = 0; b < banks_; ++b) {
    const int p = static_cast<int>(device.bank_phase(b, c.slot));
    if (p != phase_[b]) {
      emit_vector(static_cast<uint64_t>(p), 2, bank_id(b));
      phase_[b] = p;
    }
  }
}

void VcdWriter::fifo(int64_t slot, size_t occupancy) {
  if (static_cast<int64_t>(occupancy) == fifo_level_) return;
  at(slot, false);
  emit_vector(occupancy, 16, "f");
  fifo_level_ = static_cast<int64_t>(occupancy);
}

void VcdWriter::finish(int64_t slot) {
  at(slot, false);
  out_.flush();
}

}  // namespace dbender
