#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "dbender/platform.hpp"
#include "support/fixtures.hpp"

using namespace dbender;

TEST(Fifo, Gate) {
  ReadbackFifo f(512);
  EXPECT_TRUE(f.admits(512));
  f.push(Burst{});
  EXPECT_FALSE(f.admits(512));
  while (f.size() < 384) f.push(Burst{});
  EXPECT_TRUE(f.admits(128));
  EXPECT_FALSE(f.admits(129));
}

TEST(Fifo, OverflowDropsTransfer) {
  ReadbackFifo f(2);
  EXPECT_TRUE(f.push(Burst{}));
  EXPECT_TRUE(f.push(Burst{}));
  EXPECT_FALSE(f.push(Burst{}));
  EXPECT_EQ(f.size(), 2u);
  EXPECT_EQ(f.overflows(), 1u);
}

TEST(Drain, FractionalRate) {
  ReadbackFifo f(512);
  for (int i = 0; i < 10; ++i) f.push(Burst{});
  HostDrain d(1, 4);
  d.advance(f, 3);
  EXPECT_EQ(d.host().size(), 0u);
  d.advance(f, 1);
  EXPECT_EQ(d.host().size(), 1u);
  d.advance(f, 16);
  EXPECT_EQ(d.host().size(), 5u);
  EXPECT_EQ(f.size(), 5u);
}

TEST(Platform, ReceiveData) {
  Platform pf(testkit::ddr4());
  EXPECT_TRUE(pf.receive_data(4).empty());
  pf.execute(testkit::read_row_program());
  EXPECT_TRUE(pf.receive_data(0).empty());
  const auto data = pf.receive_data(128);
  EXPECT_EQ(data.size(), 128u);
  EXPECT_TRUE(pf.receive_data(1).empty());
}

TEST(Platform, ReceiveOrderMatchesRows) {
  Platform pf(testkit::ddr4());
  for (uint32_t t = 0; t < 128; ++t) {
    Burst b{};
    b[0] = t;
    pf.device().host_write_block(0, 0, t, b);
  }
  pf.execute(testkit::read_row_program());
  const auto data = pf.receive_data(128);
  ASSERT_EQ(data.size(), 128u);
  for (uint32_t t = 0; t < 128; ++t) EXPECT_EQ(data[t][0], t);
}

TEST(Platform, Initialize) {
  auto pf = Platform::initialize("ddr3_default");
  EXPECT_DOUBLE_EQ(pf->config().timing.bus_slot_ns, 2.5);
  EXPECT_FALSE(pf->scheduler().enabled(PeriodicOp::Refresh));
  EXPECT_THROW(Platform::initialize("/nonexistent/profile.json"), Error);
}

TEST(Platform, FifoNeverOverflows) {
  std::mt19937_64 rng(59);
  const auto start = std::chrono::steady_clock::now();
  uint64_t stalls = 0;
  for (int trial = 0; trial < 200; ++trial) {
    PlatformConfig cfg = testkit::ddr4();
    cfg.drain_numerator = 1 + static_cast<uint32_t>(rng() % 4);
    cfg.drain_denominator = 1 + static_cast<uint32_t>(rng() % 64);
    Platform pf(cfg);
    pf.core().load_program(pf.assemble(testkit::random_read_program(rng)).instructions);
    Machine m = pf.machine();
    bool prev_dram = false;
    while (!pf.core().state().halted) {
      const uint32_t pc = pf.core().state().pc;
      const bool dram = is_dram(pf.core().program()[pc]);
      const StepEvents ev = pf.core().step(m);
      ASSERT_LE(pf.fifo().size(), pf.fifo().capacity());
      if (dram && prev_dram) ASSERT_EQ(ev.cycles, 1u) << "stall inside a DRAM run at pc " << pc;
      prev_dram = dram;
    }
    const RunReport r = pf.core().summarize(m);
    EXPECT_EQ(r.stop, StopReason::End) << r.trap_message;
    EXPECT_EQ(r.fifo_overflows, 0u);
    EXPECT_LE(r.fifo_high_water, 512u);
    stalls += r.stall_cycles;
  }
  EXPECT_GT(stalls, 0u);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 30.0);
}

TEST(Scheduler, RefreshCountOverOneMillisecond) {
  Platform pf(testkit::ddr4());
  pf.set_refresh(true);
  Program p;
  // 1 ms of core cycles at 6 ns each.
  p.append_sleep(166667);
  const RunReport r = pf.execute(p);
  size_t refs = 0;
  for (const auto& i : r.injections) refs += i.op == PeriodicOp::Refresh;
  EXPECT_NEAR(static_cast<double>(refs), 128.0, 1.0);
}

TEST(Scheduler, SelfRefreshSuppressesInjections) {
  Platform pf(testkit::ddr4());
  pf.set_refresh(true);
  Program p;
  p.append_sre().append_sleep(166667).append_srx();
  const RunReport r = pf.execute(p);
  EXPECT_TRUE(r.injections.empty());
}

TEST(Scheduler, Priority) {
  PlatformConfig cfg = testkit::ddr4();
  PeriodicScheduler s(cfg);
  s.set_enabled(PeriodicOp::PeriodicRead, true);
  s.set_enabled(PeriodicOp::Zqs, true);
  s.set_enabled(PeriodicOp::Refresh, true);
  const int64_t late = std::max({s.period_slots(PeriodicOp::Refresh), s.period_slots(PeriodicOp::Zqs),
                                 s.period_slots(PeriodicOp::PeriodicRead)});
  EXPECT_EQ(s.due(late), PeriodicOp::Refresh);
  // Refresh stays first until every missed period is served.
  while (s.due(late) == PeriodicOp::Refresh) s.complete(PeriodicOp::Refresh);
  EXPECT_EQ(s.due(late), PeriodicOp::Zqs);
  s.complete(PeriodicOp::Zqs);
  while (s.due(late) == PeriodicOp::Refresh) s.complete(PeriodicOp::Refresh);
  EXPECT_EQ(s.due(late), PeriodicOp::PeriodicRead);
}

TEST(Scheduler, RejectsOverloadedPeriods) {
  PlatformConfig cfg = testkit::ddr4();
  cfg.scheduler.refresh_period_ns = 300.0;
  EXPECT_THROW(PeriodicScheduler s(cfg), Error);
}

TEST(Scheduler, NoInjectionInsideDramRun) {
  std::mt19937_64 rng(61);
  size_t injected = 0;
  for (int trial = 0; trial < 50; ++trial) {
    PlatformConfig cfg = testkit::ddr4();
    cfg.scheduler.refresh_period_ns = 600.0 + static_cast<double>(rng() % 2000);
    Platform pf(cfg);
    pf.set_refresh(true);
    pf.core().load_program(pf.assemble(testkit::random_read_program(rng)).instructions);
    uint64_t run_id = 0;
    // Each issued command tagged with the contiguous DRAM run it came from; 0 for injections.
    std::vector<uint64_t> tags;
    pf.set_trace([&](const IssuedCommand& c) { tags.push_back(c.injected ? 0 : run_id); });
    Machine m = pf.machine();
    bool prev_dram = false;
    while (!pf.core().state().halted) {
      const bool dram = is_dram(pf.core().program()[pf.core().state().pc]);
      if (dram && !prev_dram) ++run_id;
      prev_dram = dram;
      pf.core().step(m);
    }
    injected += pf.core().summarize(m).injections.size();
    uint64_t last = 0;
    for (size_t i = 0; i < tags.size(); ++i) {
      if (tags[i] != 0) {
        last = tags[i];
        continue;
      }
      size_t j = i;
      while (j < tags.size() && tags[j] == 0) ++j;
      if (j < tags.size()) EXPECT_NE(tags[j], last) << "injection inside run " << last;
      i = j - 1;
    }
  }
  EXPECT_GT(injected, 50u);
}

TEST(Platform, WorkflowMatchesScriptedRun) {
  Platform a(testkit::ddr4());
  const RunReport ra = a.execute(testkit::read_row_program());
  Platform b(testkit::ddr4());
  const auto image = b.assemble(testkit::read_row_program()).image();
  const RunReport rb = b.execute(image);
  EXPECT_EQ(ra.cycles, rb.cycles);
  EXPECT_EQ(ra.histogram, rb.histogram);
  EXPECT_EQ(ra.transfers, rb.transfers);
  EXPECT_EQ(a.receive_data(128), b.receive_data(128));
}
