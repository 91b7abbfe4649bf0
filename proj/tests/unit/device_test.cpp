#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dbender/device.hpp"
#include "dbender/experiments.hpp"
#include "dbender/platform.hpp"
#include "support/fixtures.hpp"

using namespace dbender;

namespace {

DeviceCommand cmd(DramOpcode op, uint32_t bank = 0, uint32_t address = 0) {
  DeviceCommand c;
  c.opcode = op;
  c.bank = bank;
  c.address = address;
  return c;
}

// ACT r1, PRE after tras slots, ACT r2 after trp slots, then close the bank.
int64_t act_pre_act(DramDevice& d, uint32_t bank, uint32_t r1, int64_t at, int64_t tras, int64_t trp) {
  d.apply_command(cmd(DramOpcode::ACT, bank, r1), at);
  d.apply_command(cmd(DramOpcode::PRE, bank), at + tras);
  d.apply_command(cmd(DramOpcode::ACT, bank, r1 + 1), at + tras + trp);
  d.apply_command(cmd(DramOpcode::PRE, bank), at + tras + trp + 40);
  return at + tras + trp + 100;
}

int64_t slots_of(double ns) { return std::llround(ns / 1.5); }

std::vector<uint64_t> random_row(std::mt19937_64& rng, size_t words) {
  std::vector<uint64_t> v(words);
  for (auto& w : v) w = rng();
  return v;
}

double ber(const std::vector<uint64_t>& got, const std::vector<uint64_t>& want) {
  size_t wrong = 0;
  for (size_t i = 0; i < got.size(); ++i) wrong += std::popcount(got[i] ^ want[i]);
  return static_cast<double>(wrong) / (64.0 * static_cast<double>(got.size()));
}

}  // namespace

TEST(Device, TrasViolationRecorded) {
  PlatformConfig cfg = testkit::ddr4();
  DramDevice d(cfg);
  d.apply_command(cmd(DramOpcode::ACT, 0, 5), 0);
  d.apply_command(cmd(DramOpcode::PRE, 0), 4);
  ASSERT_EQ(d.violations().size(), 1u);
  EXPECT_EQ(cfg.timing.rules[d.violations()[0].code].name, "tRAS");

  DramDevice ok(cfg);
  ok.apply_command(cmd(DramOpcode::ACT, 0, 5), 0);
  ok.apply_command(cmd(DramOpcode::PRE, 0), 22);
  EXPECT_TRUE(ok.violations().empty());
}

TEST(Device, AddressChecks) {
  DramDevice d(testkit::ddr4());
  EXPECT_THROW(d.apply_command(cmd(DramOpcode::ACT, 16, 0), 0), Error);
  EXPECT_THROW(d.apply_command(cmd(DramOpcode::ACT, 0, 32768), 0), Error);
  d.apply_command(cmd(DramOpcode::ACT, 0, 1), 0);
  EXPECT_THROW(d.apply_command(cmd(DramOpcode::READ, 0, 1024), 20), Error);
}

TEST(Device, NeighbourAccumulators) {
  PlatformConfig cfg = testkit::ddr4();
  const auto& rh = cfg.fault.rowhammer;
  DramDevice d(cfg);
  d.apply_command(cmd(DramOpcode::ACT, 2, 100), 0);
  EXPECT_DOUBLE_EQ(d.accumulator(2, 99), rh.base_disturb);
  EXPECT_DOUBLE_EQ(d.accumulator(2, 101), rh.base_disturb);
  EXPECT_DOUBLE_EQ(d.accumulator(2, 98), rh.base_disturb * rh.distance2_ratio);
  EXPECT_DOUBLE_EQ(d.accumulator(2, 102), rh.base_disturb * rh.distance2_ratio);
  EXPECT_DOUBLE_EQ(d.accumulator(2, 103), 0.0);
  EXPECT_DOUBLE_EQ(d.accumulator(1, 99), 0.0);
}

TEST(Device, SingleSidedHasNoAlternationBonus) {
  PlatformConfig cfg = testkit::ddr4();
  DramDevice d(cfg);
  int64_t t = 0;
  for (int i = 0; i < 50; ++i) {
    d.apply_command(cmd(DramOpcode::ACT, 0, 100), t);
    d.apply_command(cmd(DramOpcode::PRE, 0), t + 30);
    t += 60;
  }
  EXPECT_DOUBLE_EQ(d.accumulator(0, 101), 50 * cfg.fault.rowhammer.base_disturb);
}

TEST(Device, ClosedFormDoseMatchesEmulation) {
  const PlatformConfig cfg = load_config("mfrA");
  const auto& rh = cfg.fault.rowhammer;
  for (uint32_t t : {1u, 2u, 3u, 7u, 64u, 1000u}) {
    for (uint64_t h : {1ull, 5ull, 64ull, 1000ull, 4099ull}) {
      Platform pf(cfg);
      pf.execute(build_hammer_budget_program(0, 101, 103, t, h, cfg.timing));
      const double v1 = pf.device().accumulator(0, 100), v2 = pf.device().accumulator(0, 102),
                   v3 = pf.device().accumulator(0, 104);
      EXPECT_NEAR(v2, hammer_dose(VictimPosition::V2, h, t, rh), 1e-6 * v2) << t << " " << h;
      EXPECT_NEAR(v1, hammer_dose(VictimPosition::V1, h, t, rh), 1e-6 * v1) << t << " " << h;
      EXPECT_NEAR(v3, hammer_dose(VictimPosition::V3, h, t, rh), 1e-6 * v3) << t << " " << h;
      EXPECT_EQ(pf.device().command_counts()[0], 2 * h);
    }
  }
}

TEST(Device, InterleavedDoseExceedsCascaded) {
  const auto rh = load_config("mfrA").fault.rowhammer;
  const uint64_t n = 4096;
  const double alternating = hammer_dose(VictimPosition::V2, n, 1, rh);
  const double cascaded = hammer_dose(VictimPosition::V2, n, n, rh);
  EXPECT_DOUBLE_EQ(alternating, n * 2 * rh.base_disturb + (2 * n - 1) * rh.alternation_bonus);
  EXPECT_DOUBLE_EQ(cascaded, n * 2 * rh.base_disturb + rh.alternation_bonus);
  EXPECT_GT(alternating, cascaded);
}

TEST(Device, WriteReadRoundTrip) {
  PlatformConfig cfg = testkit::ddr4();
  cfg.fault.rowhammer.enabled = false;
  Platform pf(cfg);
  Program p;
  p.append_li(R1, 0).append_li(R2, 7).append_li(R3, 16).append_li(R4, 0xAAAAAAAA);
  for (uint32_t s = 0; s < 16; ++s) p.append_ldwd(R4, s);
  p.append_act(R1, false, R2, false, 11);
  p.append_write(R1, false, R3, false, false, false, 10);
  p.append_read(R1, false, R3, false, false, false, 10);
  p.append_pre(R1, false, false, 0);
  const RunReport r = pf.execute(p);
  EXPECT_EQ(r.violations, 0u);
  const auto got = pf.receive_data(1);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0], repeat_byte(0xAA));
  EXPECT_EQ(pf.device().host_read_block(0, 7, 2), repeat_byte(0xAA));
}

TEST(Device, WriteToClosedBankDropped) {
  DramDevice d(testkit::ddr4());
  Burst b = repeat_byte(0xFF);
  d.apply_command(cmd(DramOpcode::WRITE, 0, 0), 0, &b);
  ASSERT_EQ(d.violations().size(), 1u);
  EXPECT_EQ(d.violations()[0].kind, ViolationKind::State);
  EXPECT_EQ(d.violations()[0].code, static_cast<uint16_t>(StateIssue::AccessClosedBank));
  EXPECT_EQ(d.host_read_block(0, 0, 0), Burst{});
}

TEST(Device, MajorityTruthTable) {
  const PlatformConfig cfg = testkit::exact_majority_config();
  const size_t words = cfg.geometry.words_per_row();
  // Bitline i carries input case i % 8 (bit 0 -> row 0, bit 1 -> row 1, bit 2 -> row 2).
  std::array<std::vector<uint64_t>, 3> in;
  std::vector<uint64_t> maj(words, 0);
  for (auto& r : in) r.assign(words, 0);
  for (size_t i = 0; i < words * 64; ++i) {
    const unsigned c = i % 8;
    int ones = 0;
    for (int r = 0; r < 3; ++r) {
      if ((c >> r) & 1) {
        in[r][i / 64] |= uint64_t{1} << (i % 64);
        ++ones;
      }
    }
    if (ones >= 2) maj[i / 64] |= uint64_t{1} << (i % 64);
  }
  for (const auto& [tras, trp] : cfg.fault.majority.valid_timings) {
    for (uint32_t seg : {0u, 77u, 8191u}) {
      DramDevice d(cfg);
      for (int r = 0; r < 3; ++r) d.host_write_row(3, 4 * seg + r, in[r]);
      const std::vector<uint64_t> untouched(words, 0x1234);
      d.host_write_row(3, 4 * seg + 3, untouched);
      act_pre_act(d, 3, 4 * seg + 1, 0, slots_of(tras), slots_of(trp));
      ASSERT_EQ(d.multi_row_activations(), 1u);
      for (int r = 0; r < 3; ++r) EXPECT_EQ(d.host_read_row(3, 4 * seg + r), maj) << tras << "/" << trp << " row " << r;
      EXPECT_EQ(d.host_read_row(3, 4 * seg + 3), untouched);
    }
  }
}

TEST(Device, MajorityAndOr) {
  const PlatformConfig cfg = testkit::exact_majority_config();
  const size_t words = cfg.geometry.words_per_row();
  std::mt19937_64 rng(3);
  const auto a = random_row(rng, words), b = random_row(rng, words);
  std::vector<uint64_t> and_ab(words), or_ab(words);
  for (size_t i = 0; i < words; ++i) {
    and_ab[i] = a[i] & b[i];
    or_ab[i] = a[i] | b[i];
  }
  DramDevice d(cfg);
  d.host_write_row(0, 0, std::vector<uint64_t>(words, 0));
  d.host_write_row(0, 1, a);
  d.host_write_row(0, 2, b);
  int64_t t = act_pre_act(d, 0, 1, 0, 1, 1);
  EXPECT_EQ(d.host_read_row(0, 0), and_ab);

  d.host_write_row(0, 4, a);
  d.host_write_row(0, 5, std::vector<uint64_t>(words, ~uint64_t{0}));
  d.host_write_row(0, 6, b);
  act_pre_act(d, 0, 5, t, 1, 1);
  EXPECT_EQ(d.host_read_row(0, 4), or_ab);
  EXPECT_EQ(d.host_read_row(0, 6), or_ab);
}

TEST(Device, MajorityGating) {
  const PlatformConfig cfg = testkit::exact_majority_config();
  const auto& valid = cfg.fault.majority.valid_timings;
  for (int i = 1; i <= 10; ++i) {
    for (int j = 1; j <= 10; ++j) {
      const double tras = 1.5 * i, trp = 1.5 * j;
      const bool listed = std::any_of(valid.begin(), valid.end(), [&](const auto& v) {
        return std::abs(v.first - tras) < 1e-9 && std::abs(v.second - trp) < 1e-9;
      });
      DramDevice d(cfg);
      EXPECT_EQ(d.majority_timing_valid(tras, trp), listed);
      act_pre_act(d, 0, 1, 0, i, j);
      EXPECT_EQ(d.multi_row_activations(), listed ? 1u : 0u) << tras << "/" << trp;
    }
  }
  // Rows that are not the middle pair of a segment never combine.
  DramDevice d(cfg);
  act_pre_act(d, 0, 2, 0, 1, 1);
  act_pre_act(d, 0, 4, 1000, 1, 1);
  EXPECT_EQ(d.multi_row_activations(), 0u);
}

TEST(Device, AndErrorNotAboveOrError) {
  const PlatformConfig cfg = load_config("mfrB");
  const size_t words = cfg.geometry.words_per_row();
  const int trials = 1000;
  std::mt19937_64 rng(5);
  for (uint32_t seg : {3u, 4000u}) {
    DramDevice d(cfg);
    d.set_record_violations(false);
    const uint32_t base = 4 * seg;
    double sum_and = 0, sq_and = 0, sum_or = 0, sq_or = 0;
    int64_t t = 0;
    for (int k = 0; k < trials; ++k) {
      const auto a = random_row(rng, words), b = random_row(rng, words);
      std::vector<uint64_t> want(words);
      for (size_t i = 0; i < words; ++i) want[i] = a[i] & b[i];
      d.host_write_row(0, base, std::vector<uint64_t>(words, 0));
      d.host_write_row(0, base + 1, a);
      d.host_write_row(0, base + 2, b);
      t = act_pre_act(d, 0, base + 1, t, 1, 1);
      const double e_and = ber(d.host_read_row(0, base), want);
      for (size_t i = 0; i < words; ++i) want[i] = a[i] | b[i];
      d.host_write_row(0, base, a);
      d.host_write_row(0, base + 1, std::vector<uint64_t>(words, ~uint64_t{0}));
      d.host_write_row(0, base + 2, b);
      t = act_pre_act(d, 0, base + 1, t, 1, 1);
      const double e_or = ber(d.host_read_row(0, base), want);
      sum_and += e_and;
      sq_and += e_and * e_and;
      sum_or += e_or;
      sq_or += e_or * e_or;
    }
    const double m_and = sum_and / trials, m_or = sum_or / trials;
    const double v_and = sq_and / trials - m_and * m_and, v_or = sq_or / trials - m_or * m_or;
    const double sigma = std::sqrt((v_and + v_or) / trials);
    EXPECT_LE(m_and, m_or + 3 * sigma) << "segment " << seg;
    const SegmentErrorRates rates = d.segment_rates(0, seg);
    EXPECT_LE(rates.and_rate, rates.or_rate);
    EXPECT_NEAR(m_and, rates.and_rate, 3 * std::sqrt(v_and / trials) + 1e-6);
  }
}

TEST(Device, RefreshClearsDoseButKeepsFlips) {
  const PlatformConfig cfg = load_config("mfrA");
  DramDevice d(cfg);
  // Row 2 is refreshed by the first REF (rows 0..3).
  d.host_fill_row(0, 1, repeat_byte(0xAA));
  d.host_fill_row(0, 2, repeat_byte(0x55));
  d.host_fill_row(0, 3, repeat_byte(0xAA));
  d.add_disturbance(0, 2, 1e9);
  std::vector<uint64_t> flipped = d.host_read_row(0, 2);
  uint32_t flips = 0;
  for (uint64_t w : flipped) flips += std::popcount(w ^ 0x5555555555555555ull);
  ASSERT_GT(flips, 0u);
  d.add_disturbance(0, 2, 1e3);
  d.apply_command(cmd(DramOpcode::REF), 0);
  EXPECT_DOUBLE_EQ(d.accumulator(0, 2), 0.0);
  EXPECT_EQ(d.host_read_row(0, 2), flipped);
}

TEST(Device, SelfRefreshRecordsCommands) {
  DramDevice d(testkit::ddr4());
  d.set_self_refresh(true, 0);
  d.apply_command(cmd(DramOpcode::ACT, 0, 1), 4);
  ASSERT_EQ(d.violations().size(), 1u);
  EXPECT_EQ(d.violations()[0].code, static_cast<uint16_t>(StateIssue::CommandInSelfRefresh));
  d.set_self_refresh(false, 8);
  d.apply_command(cmd(DramOpcode::ACT, 0, 1), 12);
  EXPECT_EQ(d.violations().size(), 1u);
}

TEST(Device, Energy) {
  PlatformConfig zero = testkit::ddr4();
  zero.energy = {};
  Platform z(zero);
  z.execute(testkit::read_row_program());
  EXPECT_DOUBLE_EQ(z.device().energy_report().total, 0.0);

  PlatformConfig unit = testkit::ddr4();
  unit.energy = {1, 0, 0, 0, 0, 0};
  DramDevice d(unit);
  for (int i = 0; i < 10; ++i) d.apply_command(cmd(DramOpcode::ACT, static_cast<uint32_t>(i), 1), i * 10);
  EXPECT_DOUBLE_EQ(d.energy_report().total, 10.0);

  PlatformConfig c = testkit::ddr4();
  c.energy = {5, 3, 2, 0, 0, 0};
  Platform pf(c);
  pf.execute(testkit::read_row_program());
  EXPECT_DOUBLE_EQ(pf.device().energy_report().total, 264.0);
}

TEST(Device, FlipOnsetAgreesWithVisibleFlips) {
  const PlatformConfig cfg = load_config("mfrC");
  DramDevice d(cfg);
  for (uint32_t v : {11u, 21u, 31u}) {
    d.host_fill_row(0, v - 1, repeat_byte(0xAA));
    d.host_fill_row(0, v, repeat_byte(0x55));
    d.host_fill_row(0, v + 1, repeat_byte(0xAA));
    const double onset = d.flip_onset(0, v);
    ASSERT_TRUE(std::isfinite(onset));
    EXPECT_EQ(d.visible_flips_at(0, v, onset * (1 - 1e-9)), 0u);
    EXPECT_GE(d.visible_flips_at(0, v, onset), 1u);
  }
}
