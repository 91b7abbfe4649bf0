#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dbender/device.hpp"
#include "dbender/error.hpp"
#include "dbender/fifo.hpp"
#include "dbender/isa.hpp"
#include "dbender/scheduler.hpp"

namespace dbender {

inline constexpr uint64_t kBranchCycles = 7;
// Cycles for END to leave the pipeline.
inline constexpr uint64_t kPipelineDrainCycles = 5;
// pc recorded for commands the scheduler injects.
inline constexpr uint32_t kInjectedPc = 0xFFFFFFFFu;

struct CoreState {
  uint32_t pc = 0;
  // R0-R12, BASR, RASR, CASR.
  std::array<uint32_t, 16> regs{};
  Burst wdr{};
  std::vector<uint32_t> scratchpad;
  uint64_t cycle = 0;
  // Slots consumed by the DRAM pipeline (4 per DRAM instruction).
  uint64_t bus_slot = 0;
  std::array<uint64_t, kPerfCounterCount> perf{};
  uint64_t instructions = 0;
  uint64_t stall_cycles = 0;
  bool halted = false;
  std::optional<uint32_t> stalled_on_hint;
  // READs announced by the most recent hint and not yet issued.
  uint32_t read_budget = 0;
  // Destination of an LD committed by the previous instruction.
  std::optional<uint8_t> load_dest;
};

enum class StopReason : uint8_t { None, End, Trap, MaxCycles, Breakpoint, StepLimit, AlreadyHalted };
std::string_view stop_reason_name(StopReason r);

struct IssuedCommand {
  int64_t slot = 0;
  DeviceCommand cmd;
  bool injected = false;
};

// "slot,<bus_slot>,<cmd>,<bank>,<row|col>"
std::string trace_csv_line(const IssuedCommand& c);

using TraceSink = std::function<void(const IssuedCommand&)>;

struct Machine {
  DramDevice& device;
  ReadbackFifo& fifo;
  HostDrain& drain;
  PeriodicScheduler* scheduler = nullptr;
  const TraceSink* trace = nullptr;
};

struct StepEvents {
  uint32_t pc = 0;
  uint64_t cycles = 0;
  uint32_t commands = 0;
  uint32_t violations = 0;
  StopReason stop = StopReason::None;
};

struct RunReport {
  StopReason stop = StopReason::None;
  std::optional<ErrorCode> trap_code;
  std::string trap_message;
  bool max_cycles_exceeded = false;
  uint64_t cycles = 0;
  uint64_t bus_slots = 0;
  uint64_t instructions = 0;
  // Program-issued commands by class; injections are listed separately.
  std::array<uint64_t, kCommandClassCount> histogram{};
  uint64_t violations = 0;
  size_t fifo_high_water = 0;
  uint64_t fifo_overflows = 0;
  uint64_t stall_cycles = 0;
  uint64_t transfers = 0;
  std::vector<Injection> injections;
};

class Core {
 public:
  explicit Core(size_t instruction_capacity = 2048, size_t scratchpad_words = 1024);

  void load_program(std::span<const uint8_t> image, bool reset_counters = false);
  void load_program(std::vector<Instruction> program, bool reset_counters = false);
  // Clears registers, scratchpad and counters; keeps the program.
  void reset();

  StepEvents step(Machine& m);
  // Steps until END, a trap, or `max_cycles` core cycles since the program was loaded.
  RunReport run(Machine& m, uint64_t max_cycles);

  // Report for the current program so far.
  RunReport summarize(const Machine& m) const;

  uint32_t read_perf_counter(uint32_t id) const;

  const CoreState& state() const { return state_; }
  CoreState& state() { return state_; }
  const std::vector<Instruction>& program() const { return program_; }

 private:
  void advance(Machine& m, uint64_t cycles);
  void maybe_inject(Machine& m);
  void inject(Machine& m, PeriodicOp op);
  void sleep(Machine& m, uint64_t cycles);
  void issue(Machine& m, const DramCommand& c, int64_t slot);
  void exec_dram(Machine& m, const DramInstruction& d);
  void exec_regular(Machine& m, const RegularInstruction& r);
  void trap(ErrorCode code, const std::string& message);
  bool reads_load_dest(const Instruction& instr) const;

  size_t capacity_;
  std::vector<Instruction> program_;
  // Words that failed to decode; reaching one traps.
  std::map<uint32_t, std::string> undecodable_;
  CoreState state_;
  RunReport report_;
  // Counters at load time; reports cover one program.
  CoreState start_;
};

}  // namespace dbender
