#include <gtest/gtest.h>

#include <random>

#include "dbender/timing.hpp"
#include "support/fixtures.hpp"
#include "support/timing_oracle.hpp"

using namespace dbender;
using dbender::testkit::all_pairs_violations;
using dbender::testkit::sorted;

namespace {

std::vector<TimedCommand> random_trace(std::mt19937_64& rng, size_t n) {
  std::vector<TimedCommand> t;
  int64_t slot = 0;
  for (size_t i = 0; i < n; ++i) {
    slot += static_cast<int64_t>(rng() % 4 == 0 ? rng() % 300 : rng() % 12);
    TimedCommand c;
    c.slot = slot;
    c.cls = static_cast<CommandClass>(rng() % kCommandClassCount);
    c.bank = static_cast<uint32_t>(rng() % 4);
    if (c.cls == CommandClass::REF || c.cls == CommandClass::ZQS || (c.cls == CommandClass::PRE && rng() % 4 == 0)) {
      c.bank = kAllBanks;
    }
    c.pc = static_cast<uint32_t>(i);
    t.push_back(c);
  }
  return t;
}

std::vector<Violation> streaming(const std::vector<TimedCommand>& trace, const TimingConfig& cfg) {
  TimingChecker checker(cfg);
  std::vector<Violation> out;
  for (const auto& c : trace) checker.observe(c, [&](const Violation& v) { out.push_back(v); });
  return out;
}

}  // namespace

TEST(Timing, EmptyHistory) {
  const auto cfg = testkit::ddr4().timing;
  EXPECT_TRUE(check_timing({}, TimedCommand{0, CommandClass::ACT, 0, 0}, cfg).empty());
}

TEST(Timing, TrasViolation) {
  auto cfg = testkit::ddr4().timing;
  cfg.parameters["tRAS"] = 32.0;
  for (auto& r : cfg.rules) {
    if (r.prev == CommandClass::ACT && r.next == CommandClass::PRE) r.min_ns = 32.0;
  }
  const std::vector<TimedCommand> h = {{0, CommandClass::ACT, 0, 0}};
  const auto v = check_timing(h, TimedCommand{4, CommandClass::PRE, 0, 1}, cfg);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(cfg.rules[v[0].code].name, "tRAS");
  EXPECT_TRUE(check_timing(h, TimedCommand{22, CommandClass::PRE, 0, 1}, cfg).empty());
  EXPECT_EQ(check_timing(h, TimedCommand{21, CommandClass::PRE, 0, 1}, cfg).size(), 1u);
}

TEST(Timing, RuleMinSlots) {
  const auto cfg = testkit::ddr4().timing;
  for (const auto& r : cfg.rules) {
    EXPECT_EQ(rule_min_slots(r, cfg.bus_slot_ns), testkit::oracle_min_slots(r.min_ns, cfg.bus_slot_ns)) << r.name;
  }
}

TEST(Timing, StreamingMatchesAllPairs) {
  const auto cfg = testkit::ddr4().timing;
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const auto trace = random_trace(rng, 1 + rng() % 200);
    const auto expect = sorted(all_pairs_violations(trace, cfg));
    EXPECT_EQ(sorted(streaming(trace, cfg)), expect) << "trial " << trial;

    std::vector<Violation> pure;
    for (size_t i = 0; i < trace.size(); ++i) {
      const auto v = check_timing(std::span(trace.data(), i), trace[i], cfg);
      pure.insert(pure.end(), v.begin(), v.end());
    }
    EXPECT_EQ(sorted(pure), expect) << "trial " << trial;
  }
}

TEST(Timing, ScopeTable) {
  EXPECT_TRUE(scope_matches(RuleScope::SameBank, 1, 1));
  EXPECT_FALSE(scope_matches(RuleScope::SameBank, 1, 2));
  EXPECT_TRUE(scope_matches(RuleScope::SameBank, kAllBanks, 2));
  EXPECT_TRUE(scope_matches(RuleScope::SameDevice, 1, 2));
  EXPECT_TRUE(scope_matches(RuleScope::DifferentBank, 1, 2));
  EXPECT_FALSE(scope_matches(RuleScope::DifferentBank, 1, 1));
  EXPECT_FALSE(scope_matches(RuleScope::DifferentBank, kAllBanks, 1));
}

TEST(Timing, RelaxingRulesShrinksViolations) {
  const auto base = testkit::ddr4().timing;
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto trace = random_trace(rng, 150);
    TimingConfig relaxed = base;
    for (auto& r : relaxed.rules) r.min_ns = std::max(0.0, r.min_ns - 1.5 * static_cast<double>(rng() % 5));
    const auto strict = sorted(streaming(trace, base));
    const auto loose = sorted(streaming(trace, relaxed));
    EXPECT_TRUE(std::includes(strict.begin(), strict.end(), loose.begin(), loose.end(),
                              [](const Violation& a, const Violation& b) {
                                return testkit::violation_key(a) < testkit::violation_key(b);
                              }));
  }
}

TEST(Timing, ViolationCsv) {
  const auto cfg = testkit::ddr4().timing;
  EXPECT_EQ(violation_csv_header(), "bus_slot,rule,bank,prev_cmd,cur_cmd,required_ns,actual_ns");
  const std::vector<TimedCommand> h = {{10, CommandClass::ACT, 3, 0}};
  const auto v = check_timing(h, TimedCommand{14, CommandClass::READ, 3, 1}, cfg);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(violation_csv_line(v[0], cfg), "14,tRCD,3,ACT,READ,13.5,6");
}
