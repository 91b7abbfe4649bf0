#include <gtest/gtest.h>

#include <random>
#include <set>

#include "dbender/experiments.hpp"
#include "dbender/platform.hpp"
#include "support/fixtures.hpp"

using namespace dbender;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::IoError;
}

Study1Config small_study1() {
  Study1Config c;
  c.triples = 16;
  c.total_acts = uint64_t{1} << 14;
  c.t_grid = {1, 4, 64, 1024, 8192};
  return c;
}

Study2Config small_study2() {
  Study2Config c;
  c.rows = 4;
  c.trials = 3;
  c.random_patterns = 16;
  return c;
}

Study3Config small_study3() {
  Study3Config c;
  c.segments = 32;
  c.tras_grid = {1.5, 3.0, 4.5};
  c.trp_grid = {1.5, 3.0};
  return c;
}

uint32_t count_flips(const std::vector<uint64_t>& row, uint64_t expected) {
  uint32_t n = 0;
  for (uint64_t w : row) n += std::popcount(w ^ expected);
  return n;
}

}  // namespace

TEST(Experiments, UncalibratedProfileRejected) {
  const PlatformConfig raw = testkit::ddr4();
  EXPECT_EQ(code_of([&] { run_study1(raw, small_study1()); }), ErrorCode::CalibrationMissing);
  EXPECT_EQ(code_of([&] { run_study2(raw, small_study2()); }), ErrorCode::CalibrationMissing);
  EXPECT_EQ(code_of([&] { run_study3(raw, small_study3()); }), ErrorCode::CalibrationMissing);
}

TEST(Experiments, Study1Deterministic) {
  const PlatformConfig p = load_config("mfrC");
  EXPECT_EQ(run_study1(p, small_study1()).csv(), run_study1(p, small_study1()).csv());
}

TEST(Experiments, Study1ActBudget) {
  const PlatformConfig p = load_config("mfrA");
  Study1Config c = small_study1();
  c.t_grid = {1, 3, 7, 64, 1000, 8192};
  const auto r = run_study1(p, c);
  for (const auto& row : r.rows) {
    EXPECT_NEAR(static_cast<double>(row.acts_issued), static_cast<double>(c.total_acts), 2.0 * row.t) << row.t;
  }
}

TEST(Experiments, Study1Iterations) {
  Study1Config c;
  c.triples = 2;
  c.t_grid = {1, 65536};
  const auto r = run_study1(load_config("mfrB"), c);
  EXPECT_EQ(r.at(1, "V2").iterations, 512u * 1024u);
  EXPECT_EQ(r.at(65536, "V2").iterations, 8u);
  EXPECT_EQ(r.at(1, "V2").acts_issued, uint64_t{1} << 20);
}

TEST(Experiments, Study1V2Monotone) {
  for (const char* id : {"mfrA", "mfrB", "mfrC"}) {
    Study1Config c;
    c.triples = 64;
    c.seed = 5;
    const auto r = run_study1(load_config(id), c);
    double prev = 1e300;
    for (uint32_t t : default_t_grid()) {
      const double f = r.at(t, "V2").flips_avg;
      EXPECT_LE(f, prev) << id << " T=" << t;
      prev = f;
    }
  }
}

TEST(Experiments, ReplayMatchesEmulation) {
  const PlatformConfig p = load_config("mfrC");
  const uint32_t b = 201;
  for (uint32_t t : {1u, 16u, 4096u}) {
    const uint64_t h = 40000;
    Platform emu(p);
    auto init = [&](DramDevice& d) {
      for (uint32_t v : {b, b + 2, b + 4}) d.host_fill_row(0, v, repeat_byte(0x55));
      for (uint32_t a : {b + 1, b + 3}) d.host_fill_row(0, a, repeat_byte(0xAA));
    };
    init(emu.device());
    emu.execute(build_hammer_budget_program(0, b + 1, b + 3, t, h, p.timing));
    DramDevice replay(p);
    init(replay);
    uint32_t total = 0;
    for (uint32_t k = 0; k < 3; ++k) {
      const uint32_t v = b + 2 * k;
      replay.add_disturbance(0, v, emu.device().accumulator(0, v));
      const uint32_t want = count_flips(emu.device().host_read_row(0, v), 0x5555555555555555ull);
      EXPECT_EQ(count_flips(replay.host_read_row(0, v), 0x5555555555555555ull), want) << "T=" << t << " V" << k + 1;
      EXPECT_EQ(replay.host_read_row(0, v), emu.device().host_read_row(0, v));
      total += want;
    }
    EXPECT_GT(total, 0u) << "T=" << t;
  }
}

TEST(Experiments, HammerCountIsMinimal) {
  const auto rh = load_config("mfrA").fault.rowhammer;
  std::mt19937_64 rng(83);
  for (int i = 0; i < 2000; ++i) {
    const double threshold = 1.0 + static_cast<double>(rng() % 2000000);
    const uint64_t t = uint64_t{1} << (rng() % 17);
    const auto v = static_cast<VictimPosition>(rng() % 3);
    const uint64_t h = hammer_count_for_dose(v, threshold, t, rh);
    ASSERT_GT(h, 0u);
    EXPECT_GE(hammer_dose(v, h, t, rh), threshold);
    EXPECT_LT(hammer_dose(v, h - 1, t, rh), threshold);
  }
  EXPECT_EQ(hammer_count_for_dose(VictimPosition::V2, 1e30, 1, rh), 0u);
}

TEST(Experiments, TripleBases) {
  const Geometry g = load_config("mfrA").geometry;
  const auto bases = study1_triple_bases(g, 1, 1024, false);
  ASSERT_EQ(bases.size(), 1024u);
  std::set<uint32_t> seen(bases.begin(), bases.end());
  EXPECT_EQ(seen.size(), bases.size());
  for (uint32_t b : bases) {
    EXPECT_EQ(b % 8, 1u);
    EXPECT_LT(b + 4, g.rows_per_bank);
  }
  EXPECT_EQ(study1_triple_bases(g, 1, 0, true).size(), g.rows_per_bank / 8);
}

TEST(Experiments, Study2Deterministic) {
  const PlatformConfig p = load_config("mfrA");
  EXPECT_EQ(run_study2(p, small_study2()).csv(), run_study2(p, small_study2()).csv());
}

TEST(Experiments, Study2WithoutGateSetsAgree) {
  PlatformConfig p = load_config("mfrB");
  p.fault.rowhammer.data_pattern_gate = false;
  Study2Config c = small_study2();
  c.random_patterns = 256;
  const auto r = run_study2(p, c);
  EXPECT_EQ(r.rows_with_extra_cells(), 0u);
  std::map<std::tuple<std::string, uint32_t>, std::vector<uint16_t>> repeated, random;
  for (const auto& row : r.rows) {
    auto& dst = row.pattern_class == "repeated8" ? repeated : random;
    dst[{row.victim_init, row.victim_row}] = row.flipped_bits;
  }
  EXPECT_EQ(repeated, random);
  size_t cells = 0;
  for (const auto& [k, v] : repeated) cells += v.size();
  EXPECT_GT(cells, 0u);
}

TEST(Experiments, Study2GateAddsCells) {
  Study2Config c = small_study2();
  c.trials = 20;
  c.random_patterns = 256;
  const auto r = run_study2(load_config("mfrC"), c);
  EXPECT_GE(r.rows_with_extra_cells(), 3u);
}

TEST(Experiments, Study3ExactMajority) {
  PlatformConfig p = testkit::exact_majority_config();
  p.fault.calibrated = true;
  const auto r = run_study3(p, small_study3());
  for (const auto& row : r.rows) {
    const bool valid = (row.tras == 1.5 && (row.trp == 1.5 || row.trp == 3.0)) || (row.tras == 3.0 && row.trp == 1.5);
    EXPECT_DOUBLE_EQ(row.ber, valid ? 0.0 : 1.0) << row.tras << "/" << row.trp;
  }
  EXPECT_EQ(r.counts.both_below_10, 32u);
  EXPECT_EQ(r.counts.and_only_below_3, 0u);
}

TEST(Experiments, Study3CountsNested) {
  Study3Config c = small_study3();
  c.segments = 512;
  c.valid_only = true;
  const auto r = run_study3(load_config("mfrB"), c);
  EXPECT_LE(r.counts.both_below_3, r.counts.both_below_5);
  EXPECT_LE(r.counts.both_below_5, r.counts.both_below_10);
  EXPECT_EQ(run_study3(load_config("mfrB"), c).csv(), r.csv());
}

TEST(Experiments, Study3WithoutMajoritySupport) {
  const auto r = run_study3(load_config("mfrA"), small_study3());
  for (const auto& row : r.rows) EXPECT_DOUBLE_EQ(row.ber, 1.0);
  EXPECT_EQ(r.counts.both_below_10, 0u);
  EXPECT_EQ(r.counts.and_only_below_3, 0u);
}

TEST(Calibration, RejectsRisingFlips) {
  CalibrationTargets t;
  t.study1 = Study1Targets{30.0, 300.0, 99000, 130000};
  EXPECT_EQ(code_of([&] { calibrate(load_config("mfrA"), t); }), ErrorCode::FitDiverged);
  t.study1 = Study1Targets{300.0, 30.0, 130000, 99000};
  EXPECT_EQ(code_of([&] { calibrate(load_config("mfrA"), t); }), ErrorCode::FitDiverged);
}

TEST(Calibration, Idempotent) {
  CalibrationTargets t = default_targets("mfrC");
  CalibrationOptions o;
  o.triples = 128;
  const auto a = calibrate(load_config("mfrC"), t, o);
  const auto b = calibrate(load_config("mfrC"), t, o);
  EXPECT_EQ(config_to_json(a.config), config_to_json(b.config));
  EXPECT_TRUE(a.config.fault.calibrated);
  EXPECT_FALSE(a.log.empty());
}
