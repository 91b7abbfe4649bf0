#include "dbender/debugger.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include "dbender/error.hpp"

namespace dbender {

namespace {

uint32_t parse_number(const std::string& text) {
  try {
    size_t used = 0;
    const unsigned long v = std::stoul(text, &used, 0);
    if (used == text.size()) return static_cast<uint32_t>(v);
  } catch (const std::exception&) {
  }
  fail(ErrorCode::SyntaxError, "expected a number, got '" + text + "'");
}

bool is_number(const std::string& text) {
  return !text.empty() && std::isdigit(static_cast<unsigned char>(text[0]));
}

std::string hex(uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

}  // namespace

size_t ViolationReport::timing_count() const {
  return std::count_if(violations.begin(), violations.end(),
                       [](const Violation& v) { return v.kind == ViolationKind::Timing; });
}

size_t ViolationReport::state_count() const { return violations.size() - timing_count(); }

ViolationReport simulate(const AssembledProgram& program, PlatformConfig config, uint64_t max_cycles) {
  config.scheduler.refresh_enabled = false;
  config.scheduler.zqs_enabled = false;
  config.scheduler.periodic_read_enabled = false;
  Platform platform(std::move(config));
  ViolationReport report;
  report.run = platform.execute(program, max_cycles);
  report.violations = platform.device().violations();
  return report;
}

std::string violation_report_csv(const ViolationReport& report, const TimingConfig& timing) {
  std::string out = violation_csv_header() + "\n";
  for (const auto& v : report.violations) out += violation_csv_line(v, timing) + "\n";
  return out;
}

DebugSession::DebugSession(PlatformConfig config, AssembledProgram program)
    : platform_(std::make_unique<Platform>(std::move(config))), program_(std::move(program)) {
  platform_->core().load_program(program_.instructions);
  platform_->set_trace([this](const IssuedCommand& c) {
    trace_.push_back(c);
    if (vcd_) vcd_->command(c, platform_->device());
  });
}

void DebugSession::add_breakpoint(uint32_t address) {
  if (address >= program_.instructions.size()) {
    fail(ErrorCode::OutOfRange, "breakpoint " + std::to_string(address) + " outside program of " +
                                    std::to_string(program_.instructions.size()) + " instructions");
  }
  breakpoints_.insert(address);
}

uint32_t DebugSession::add_breakpoint(const std::string& where) {
  uint32_t address;
  if (is_number(where)) {
    address = parse_number(where);
  } else {
    auto a = program_.label_address(where);
    if (!a) fail(ErrorCode::UndefinedLabel, where);
    address = *a;
  }
  add_breakpoint(address);
  return address;
}

void DebugSession::remove_breakpoint(uint32_t address) { breakpoints_.erase(address); }

StopReason DebugSession::step_one() {
  Machine m = platform_->machine();
  const StepEvents ev = platform_->core().step(m);
  if (vcd_) vcd_->fifo(static_cast<int64_t>(platform_->core().state().cycle) * 4, platform_->fifo().size());
  return ev.stop;
}

StopReason DebugSession::step(uint64_t n) {
  if (halted()) return StopReason::AlreadyHalted;
  for (uint64_t i = 0; i < n; ++i) {
    const StopReason r = step_one();
    if (r != StopReason::None) return r;
    if (i + 1 < n && breakpoints_.count(pc())) return StopReason::Breakpoint;
  }
  return StopReason::StepLimit;
}

StopReason DebugSession::resume(uint64_t max_cycles) {
  if (halted()) return StopReason::AlreadyHalted;
  const uint64_t start = platform_->core().state().cycle;
  while (true) {
    const StopReason r = step_one();
    if (r != StopReason::None) return r;
    if (breakpoints_.count(pc())) return StopReason::Breakpoint;
    if (platform_->core().state().cycle - start >= max_cycles) return StopReason::MaxCycles;
  }
}

uint32_t DebugSession::probe_register(RegisterId r) const {
  if (r.is_wdr()) fail(ErrorCode::OutOfRange, "WDR is probed by slice");
  if (!r.encodable()) fail(ErrorCode::OutOfRange, "register index " + std::to_string(r.index()));
  return platform_->core().state().regs[r.index()];
}

std::vector<uint32_t> DebugSession::probe_scratchpad(uint32_t first, uint32_t last) const {
  const auto& sp = platform_->core().state().scratchpad;
  if (first > last || last >= sp.size()) {
    fail(ErrorCode::OutOfRange, "scratchpad range " + std::to_string(first) + ".." + std::to_string(last));
  }
  return {sp.begin() + first, sp.begin() + last + 1};
}

uint32_t DebugSession::probe_wdr(uint32_t slice) const {
  if (slice >= static_cast<uint32_t>(kWdrSlices)) fail(ErrorCode::OutOfRange, "wdr slice " + std::to_string(slice));
  const uint64_t word = platform_->core().state().wdr[slice / 2];
  return static_cast<uint32_t>(word >> ((slice % 2) * 32));
}

std::vector<uint32_t> DebugSession::probe(const std::string& target) const {
  auto bracket = [&](const std::string& prefix) -> std::string {
    if (target.size() <= prefix.size() + 2 || target.back() != ']') fail(ErrorCode::SyntaxError, target);
    return target.substr(prefix.size() + 1, target.size() - prefix.size() - 2);
  };
  if (target.rfind("sp[", 0) == 0) {
    const std::string body = bracket("sp");
    const auto dots = body.find("..");
    if (dots == std::string::npos) {
      const uint32_t a = parse_number(body);
      return probe_scratchpad(a, a);
    }
    return probe_scratchpad(parse_number(body.substr(0, dots)), parse_number(body.substr(dots + 2)));
  }
  if (target.rfind("wdr[", 0) == 0) return {probe_wdr(parse_number(bracket("wdr")))};
  auto r = parse_register(target);
  if (!r) fail(ErrorCode::InvalidRegister, target);
  return {probe_register(*r)};
}

std::vector<Violation> DebugSession::new_violations() {
  const auto& all = violations();
  std::vector<Violation> out(all.begin() + static_cast<std::ptrdiff_t>(violation_cursor_), all.end());
  violation_cursor_ = all.size();
  return out;
}

RunReport DebugSession::report() {
  Machine m = platform_->machine();
  return platform_->core().summarize(m);
}

void DebugSession::attach_vcd(std::ostream& out) {
  vcd_ = std::make_unique<VcdWriter>(out, platform_->config().geometry.banks, platform_->config().timing.bus_slot_ns);
}

void DebugSession::finish_vcd() {
  if (vcd_) vcd_->finish(static_cast<int64_t>(platform_->core().state().cycle) * 4);
}

void run_repl(DebugSession& session, std::istream& in, std::ostream& out) {
  const TimingConfig& timing = session.platform().config().timing;
  auto where = [&](StopReason r) {
    out << stop_reason_name(r) << " pc=" << session.pc();
    if (session.pc() < session.program().instructions.size() && !session.halted()) {
      out << "  " << disassemble(session.program().instructions[session.pc()]);
    }
    out << "\n";
    for (const auto& v : session.new_violations()) out << "  violation " << violation_csv_line(v, timing) << "\n";
  };
  std::string line;
  out << "(dbg) " << std::flush;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string cmd, arg;
    ls >> cmd >> arg;
    try {
      if (cmd.empty()) {
      } else if (cmd == "q") {
        break;
      } else if (cmd == "b") {
        const uint32_t a = session.add_breakpoint(arg);
        out << "breakpoint at " << a << "\n";
      } else if (cmd == "s") {
        where(session.step(arg.empty() ? 1 : parse_number(arg)));
      } else if (cmd == "c") {
        where(session.resume());
      } else if (cmd == "p") {
        const auto values = session.probe(arg);
        for (size_t i = 0; i < values.size(); ++i) out << (i ? " " : "") << hex(values[i]);
        out << "\n";
      } else if (cmd == "viol") {
        out << violation_csv_header() << "\n";
        for (const auto& v : session.violations()) out << violation_csv_line(v, timing) << "\n";
      } else {
        out << "unknown command '" << cmd << "'\n";
      }
    } catch (const Error& e) {
      out << "error: " << e.what() << "\n";
    }
    out << "(dbg) " << std::flush;
  }
  out << "\n";
}

}  // namespace dbender
