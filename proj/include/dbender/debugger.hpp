#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "dbender/platform.hpp"
#include "dbender/program.hpp"
#include "dbender/vcd.hpp"

namespace dbender {

struct ViolationReport {
  std::vector<Violation> violations;
  RunReport run;
  size_t timing_count() const;
  size_t state_count() const;
  bool empty() const { return violations.empty(); }
};

// Full run with the periodic scheduler disabled; every violation is kept.
ViolationReport simulate(const AssembledProgram& program, PlatformConfig config,
                         uint64_t max_cycles = kDefaultMaxCycles);
std::string violation_report_csv(const ViolationReport& report, const TimingConfig& timing);

class DebugSession {
 public:
  DebugSession(PlatformConfig config, AssembledProgram program);

  // Accepts a label or a decimal/0x address.
  uint32_t add_breakpoint(const std::string& where);
  void add_breakpoint(uint32_t address);
  void remove_breakpoint(uint32_t address);
  const std::set<uint32_t>& breakpoints() const { return breakpoints_; }

  // Commits up to n instructions; stops early at a breakpoint, END or a trap.
  StopReason step(uint64_t n = 1);
  StopReason resume(uint64_t max_cycles = kDefaultMaxCycles);

  uint32_t pc() const { return platform_->core().state().pc; }
  bool halted() const { return platform_->core().state().halted; }

  uint32_t probe_register(RegisterId r) const;
  std::vector<uint32_t> probe_scratchpad(uint32_t first, uint32_t last) const;
  uint32_t probe_wdr(uint32_t slice) const;
  // "R5", "CASR", "sp[a..b]", "sp[a]", "wdr[k]".
  std::vector<uint32_t> probe(const std::string& target) const;

  const std::vector<Violation>& violations() const { return platform_->device().violations(); }
  // Violations recorded since the previous call.
  std::vector<Violation> new_violations();

  const std::vector<IssuedCommand>& trace() const { return trace_; }
  RunReport report();
  void attach_vcd(std::ostream& out);
  void finish_vcd();

  Platform& platform() { return *platform_; }
  const AssembledProgram& program() const { return program_; }

 private:
  StopReason step_one();

  std::unique_ptr<Platform> platform_;
  AssembledProgram program_;
  std::set<uint32_t> breakpoints_;
  size_t violation_cursor_ = 0;
  std::vector<IssuedCommand> trace_;
  std::unique_ptr<VcdWriter> vcd_;
};

// Commands: b <label|addr>, s [n], c, p <reg|sp[a..b]|wdr[k]>, viol, q.
void run_repl(DebugSession& session, std::istream& in, std::ostream& out);

}  // namespace dbender
