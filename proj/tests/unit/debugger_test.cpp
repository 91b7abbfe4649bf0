#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "dbender/debugger.hpp"
#include "dbender/experiments.hpp"
#include "support/fixtures.hpp"
#include "support/timing_oracle.hpp"

using namespace dbender;

namespace {

std::vector<TimedCommand> timed(const std::vector<IssuedCommand>& trace) {
  std::vector<TimedCommand> out;
  for (const auto& c : trace) {
    CommandClass cls = CommandClass::ACT;
    switch (c.cmd.opcode) {
      case DramOpcode::ACT: cls = CommandClass::ACT; break;
      case DramOpcode::PRE:
      case DramOpcode::PREA: cls = CommandClass::PRE; break;
      case DramOpcode::READ: cls = CommandClass::READ; break;
      case DramOpcode::WRITE: cls = CommandClass::WRITE; break;
      case DramOpcode::REF: cls = CommandClass::REF; break;
      case DramOpcode::ZQS: cls = CommandClass::ZQS; break;
      case DramOpcode::NOP: continue;
    }
    out.push_back({c.slot, cls, c.cmd.bank, c.cmd.pc});
  }
  return out;
}

std::string rule_name(const Violation& v, const TimingConfig& t) { return t.rules.at(v.code).name; }

}  // namespace

TEST(Simulate, ReadRowIsClean) {
  const auto report = simulate(testkit::read_row_program().assemble(), testkit::ddr4());
  EXPECT_TRUE(report.empty());
  EXPECT_EQ(report.run.transfers, 128u);
}

TEST(Simulate, MajorityKernelFlagsTrasAndTrp) {
  const PlatformConfig cfg = testkit::ddr4();
  const auto prog = build_majority_program(0, 1, 2, 1, 1, cfg.timing).assemble();
  const auto report = simulate(prog, cfg);
  ASSERT_EQ(report.timing_count(), 2u);
  EXPECT_EQ(report.state_count(), 0u);
  EXPECT_EQ(rule_name(report.violations[0], cfg.timing), "tRAS");
  EXPECT_EQ(report.violations[0].cur_cmd, CommandClass::PRE);
  EXPECT_EQ(rule_name(report.violations[1], cfg.timing), "tRP");
  EXPECT_EQ(report.violations[1].cur_cmd, CommandClass::ACT);
  EXPECT_EQ(report.violations[1].cur_pc, report.violations[0].cur_pc);
}

TEST(Simulate, RegularOnlyIsClean) {
  Program p;
  p.append_li(R1, 4).append_addi(R1, R1, 1).append_sleep(10);
  EXPECT_TRUE(simulate(p.assemble(), testkit::ddr4()).empty());
}

TEST(Simulate, ReportMatchesAllPairsOracle) {
  const PlatformConfig cfg = testkit::ddr4();
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 100; ++trial) {
    DebugSession s(cfg, testkit::random_mixed_program(rng).assemble());
    s.resume();
    const auto expect = testkit::sorted(testkit::all_pairs_violations(timed(s.trace()), cfg.timing));
    std::vector<Violation> got;
    for (const auto& v : s.violations()) {
      if (v.kind == ViolationKind::Timing) got.push_back(v);
    }
    EXPECT_EQ(testkit::sorted(got), expect) << "trial " << trial;
    const auto report = simulate(s.program(), cfg);
    EXPECT_EQ(report.timing_count(), expect.size());
  }
}

TEST(Session, BreakpointAtLabel) {
  const auto prog = testkit::read_row_program().assemble();
  DebugSession s(testkit::ddr4(), prog);
  const uint32_t at = s.add_breakpoint("read");
  EXPECT_EQ(at, *prog.label_address("read"));
  EXPECT_EQ(s.resume(), StopReason::Breakpoint);
  EXPECT_EQ(s.pc(), at);
  EXPECT_EQ(s.probe_register(R3), 0u);
  EXPECT_EQ(s.resume(), StopReason::Breakpoint);
  EXPECT_EQ(s.probe_register(R3), 8u);
  s.remove_breakpoint(at);
  EXPECT_EQ(s.resume(), StopReason::End);
  EXPECT_EQ(s.resume(), StopReason::AlreadyHalted);
  EXPECT_THROW(s.add_breakpoint("nope"), Error);
  EXPECT_THROW(s.add_breakpoint(9999), Error);
}

TEST(Session, StepAndProbe) {
  Program p;
  p.append_li(R5, 0).append_li(R6, 0x77).append_ldwd(R6, 5).append_st(R6, R5, 3);
  DebugSession s(testkit::ddr4(), p.assemble());
  s.step(1);
  EXPECT_EQ(s.pc(), 1u);
  EXPECT_EQ(s.probe_register(R5), 0u);
  s.step(3);
  EXPECT_EQ(s.pc(), 4u);
  EXPECT_EQ(s.probe_wdr(5), 0x77u);
  EXPECT_EQ(s.probe("sp[3]"), std::vector<uint32_t>{0x77});
  EXPECT_EQ(s.probe("sp[2..3]"), (std::vector<uint32_t>{0, 0x77}));
  EXPECT_EQ(s.probe("R6"), std::vector<uint32_t>{0x77});
  try {
    s.probe("sp[1024]");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfRange);
  }
}

TEST(Session, DoesNotPerturbTrace) {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 30; ++trial) {
    const auto prog = testkit::random_mixed_program(rng).assemble();
    DebugSession plain(testkit::ddr4(), prog);
    plain.resume();
    DebugSession poked(testkit::ddr4(), prog);
    for (int b = 0; b < 3; ++b) poked.add_breakpoint(static_cast<uint32_t>(rng() % prog.instructions.size()));
    while (!poked.halted()) {
      poked.step(1 + rng() % 5);
      poked.probe("R0");
      poked.probe("sp[0..7]");
      if (rng() % 3 == 0) poked.resume();
    }
    ASSERT_EQ(plain.trace().size(), poked.trace().size());
    for (size_t i = 0; i < plain.trace().size(); ++i) {
      EXPECT_EQ(trace_csv_line(plain.trace()[i]), trace_csv_line(poked.trace()[i]));
    }
    EXPECT_EQ(plain.violations(), poked.violations());
  }
}

TEST(Repl, Script) {
  DebugSession s(testkit::ddr4(), testkit::read_row_program().assemble());
  std::istringstream in("b read\nc\np R3\nc\np R3\ns 2\np sp[0..1]\np wdr[0]\nviol\nbogus\nq\n");
  std::ostringstream out;
  run_repl(s, in, out);
  const std::string text = out.str();
  EXPECT_NE(text.find("breakpoint at 9"), std::string::npos) << text;
  EXPECT_NE(text.find("breakpoint pc=9"), std::string::npos) << text;
  EXPECT_NE(text.find("(dbg) 0x8\n"), std::string::npos) << text;
  EXPECT_NE(text.find("0x0 0x0"), std::string::npos) << text;
  EXPECT_NE(text.find("bus_slot,rule,bank"), std::string::npos) << text;
  EXPECT_NE(text.find("unknown command 'bogus'"), std::string::npos) << text;
}

TEST(Vcd, DumpsPhasesAndFifo) {
  auto dump = [] {
    DebugSession s(testkit::ddr4(), testkit::read_row_program().assemble());
    std::ostringstream out;
    s.attach_vcd(out);
    s.resume();
    s.finish_vcd();
    return out.str();
  };
  const std::string a = dump();
  EXPECT_NE(a.find("$timescale 1ps $end"), std::string::npos);
  EXPECT_NE(a.find("$enddefinitions $end"), std::string::npos);
  EXPECT_NE(a.find("bank0_phase"), std::string::npos);
  EXPECT_NE(a.find("fifo_occupancy"), std::string::npos);
  // 128 READs and an ACT/PRE pair put value changes on the command wire.
  size_t changes = 0;
  for (size_t pos = a.find(" c\n"); pos != std::string::npos; pos = a.find(" c\n", pos + 1)) ++changes;
  EXPECT_GE(changes, 130u);
  EXPECT_EQ(a, dump());
}
