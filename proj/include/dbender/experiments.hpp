#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dbender/config.hpp"
#include "dbender/platform.hpp"
#include "dbender/program.hpp"

namespace dbender {

// ---- Study 1: interleaving of aggressor activations ----

struct Study1Config {
  uint64_t seed = 1;
  uint32_t triples = 1024;
  uint64_t total_acts = uint64_t{1} << 20;
  std::vector<uint32_t> t_grid;  // empty: 1, 2, 4, ..., 65536
  bool full_bank = false;
  uint32_t bank = 0;
};

struct Study1Row {
  uint32_t t = 0;
  std::string victim;  // V1, V2, V3
  double flips_avg = 0.0;
  // flips_avg relative to the largest T in the grid.
  double flips_normalized = 0.0;
  uint64_t hc_first_min = 0;  // 0: no flip within the search bound
  uint64_t acts_issued = 0;
  uint64_t iterations = 0;
  double dose = 0.0;
};

struct Study1Result {
  std::string profile;
  std::vector<Study1Row> rows;

  const Study1Row& at(uint32_t t, const std::string& victim) const;
  std::string csv() const;
  std::string summary() const;
};

std::vector<uint32_t> default_t_grid();

// One iteration of the double-sided kernel wrapped in a loop of `iterations`.
// Registers: R0 bank, R1/R2 aggressors, R3 hammer count, R4 iteration count.
Program build_hammer_program(uint32_t bank, uint32_t a1, uint32_t a2, uint32_t t, uint64_t iterations,
                             const TimingConfig& timing);
// Hammer program for `acts_per_aggressor` ACTs on each aggressor at interleave t;
// the last iteration is truncated.
Program build_hammer_budget_program(uint32_t bank, uint32_t a1, uint32_t a2, uint32_t t, uint64_t acts_per_aggressor,
                                    const TimingConfig& timing);

enum class VictimPosition : uint8_t { V1, V2, V3 };
// Dose a victim receives from h ACTs per aggressor at interleave t.
double hammer_dose(VictimPosition v, uint64_t h, uint64_t t, const RowHammerConfig& rh);
// Smallest h with hammer_dose(v, h, t) >= threshold; 0 if above `limit`.
uint64_t hammer_count_for_dose(VictimPosition v, double threshold, uint64_t t, const RowHammerConfig& rh,
                               uint64_t limit = uint64_t{1} << 24);

// Base rows (V1) of the tested triples; one triple per 8-row slot.
std::vector<uint32_t> study1_triple_bases(const Geometry& geometry, uint64_t seed, uint32_t triples, bool full_bank);

Study1Result run_study1(const PlatformConfig& profile, const Study1Config& cfg);

// ---- Study 2: data patterns ----

struct Study2Config {
  uint64_t seed = 1;
  uint32_t rows = 24;
  uint32_t trials = 100;
  uint32_t random_patterns = 256;
  // 0: take the profile's study2_hammers knob.
  uint64_t hammers = 0;
  uint32_t bank = 0;
  // Victim dose of the hammer kernel; 0: emulate the kernel to measure it.
  double victim_dose = 0.0;
};

struct Study2Row {
  std::string pattern_class;  // repeated8, random512
  std::string victim_init;    // zeros, ones
  uint32_t victim_row = 0;
  uint32_t column = 0;
  std::vector<uint16_t> flipped_bits;
};

struct Study2Result {
  std::string profile;
  uint64_t seed = 0;
  std::vector<Study2Row> rows;
  // Per tested victim row: random set holds a cell the repeated set lacks.
  std::vector<uint32_t> victim_rows;
  std::vector<bool> random_adds_cell;

  uint32_t rows_with_extra_cells() const;
  std::string csv() const;
  std::string summary() const;
};

uint64_t study2_hammers(const PlatformConfig& profile, const Study2Config& cfg);
// Dose the sandwiched row receives from the emulated double-sided kernel at T = 1.
double study2_victim_dose(const PlatformConfig& profile, const Study2Config& cfg);
Study2Result run_study2(const PlatformConfig& profile, const Study2Config& cfg);

// ---- Study 3: in-DRAM majority ----

struct Study3Config {
  uint64_t seed = 1;
  uint32_t segments = 8192;
  uint32_t bank = 0;
  // tRAS and tRP grid in ns; empty: 1.5 .. 15.0 in 1.5 steps.
  std::vector<double> tras_grid;
  std::vector<double> trp_grid;
  // Skip timing pairs outside the profile's valid set (their BER is 1 by definition).
  bool valid_only = false;
};

struct Study3Row {
  double tras = 0.0;
  double trp = 0.0;
  uint32_t segment = 0;
  bool is_and = true;
  double ber = 1.0;
};

struct Study3Counts {
  uint32_t and_only_below_3 = 0;
  uint32_t both_below_3 = 0;
  uint32_t both_below_5 = 0;
  uint32_t both_below_10 = 0;
};

struct Study3Result {
  std::string profile;
  std::vector<Study3Row> rows;
  // Best BER over timing pairs per segment.
  std::vector<double> best_and;
  std::vector<double> best_or;
  Study3Counts counts;
  uint64_t activations = 0;

  std::string csv() const;
  std::string summary() const;
};

Program build_majority_program(uint32_t bank, uint32_t r1, uint32_t r2, uint32_t tras_slots, uint32_t trp_slots,
                               const TimingConfig& timing);
Study3Counts count_segments(const std::vector<double>& best_and, const std::vector<double>& best_or);
Study3Result run_study3(const PlatformConfig& profile, const Study3Config& cfg);

// ---- Calibration ----

struct Study1Targets {
  double flips_t1 = 0.0;
  double flips_t64k = 0.0;
  double hc_t1 = 0.0;
  double hc_t64k = 0.0;
};

struct Study3Targets {
  uint32_t and_only_below_3 = 35;
  uint32_t both_below_5 = 160;
  uint32_t both_below_10 = 4546;
};

struct CalibrationTargets {
  std::optional<Study1Targets> study1;
  std::optional<Study3Targets> study3;
};

// Endpoint targets for the shipped manufacturer profiles (mfrA, mfrB, mfrC).
CalibrationTargets default_targets(const std::string& profile_id);

struct CalibrationOptions {
  uint64_t study_seed = 1;
  uint32_t triples = 1024;
  uint32_t segments = 8192;
  // Fraction of a victim block's bits weaker than the Study 2 dose.
  double study2_weak_fraction = 0.02;
  // Called with each log line as it is produced.
  std::function<void(const std::string&)> progress;
};

struct CalibrationReport {
  PlatformConfig config;
  std::vector<std::string> log;
};

CalibrationReport calibrate(const PlatformConfig& base, const CalibrationTargets& targets,
                            const CalibrationOptions& options = {});

}  // namespace dbender
