#include "dbender/experiments.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "dbender/error.hpp"
#include "dbender/fault_model.hpp"

namespace dbender {

namespace {

constexpr uint64_t kTripleTag = 0x54524950ULL;
constexpr uint64_t kPatternTag = 0x50415454ULL;
constexpr uint64_t kVictimTag = 0x56494354ULL;
constexpr uint64_t kOperandTag = 0x4f504e44ULL;

void require_calibrated(const PlatformConfig& profile) {
  if (!profile.fault.calibrated) {
    fail(ErrorCode::CalibrationMissing, "profile '" + profile.name + "' has no calibrated fault model");
  }
}

uint32_t delay_for(int64_t slots) { return slots > 0 ? static_cast<uint32_t>(slots - 1) : 0; }

uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

const char* victim_name(VictimPosition v) {
  switch (v) {
    case VictimPosition::V1: return "V1";
    case VictimPosition::V2: return "V2";
    case VictimPosition::V3: return "V3";
  }
  return "?";
}

uint32_t popcount_diff(const std::vector<uint64_t>& row, uint64_t expected) {
  uint32_t n = 0;
  for (uint64_t w : row) n += static_cast<uint32_t>(std::popcount(w ^ expected));
  return n;
}

uint32_t popcount_diff_rows(const std::vector<uint64_t>& row, const std::vector<uint64_t>& expected) {
  uint32_t n = 0;
  for (size_t i = 0; i < row.size(); ++i) n += static_cast<uint32_t>(std::popcount(row[i] ^ expected[i]));
  return n;
}

// Sample k of n slots without replacement, sorted.
std::vector<uint32_t> pick_slots(uint64_t seed, uint64_t tag, uint32_t n, uint32_t k) {
  std::vector<uint32_t> all(n);
  for (uint32_t i = 0; i < n; ++i) all[i] = i;
  std::mt19937_64 rng(hash_combine({seed, tag}));
  k = std::min(k, n);
  for (uint32_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<uint32_t> d(i, n - 1);
    std::swap(all[i], all[d(rng)]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

void emit_hammer_block(Program& p, RegisterId aggressor, uint32_t t, const std::string& label,
                       const TimingConfig& timing) {
  p.append_li(R3, 0);
  p.append_label(label);
  p.append_act(R0, false, aggressor, false, delay_for(timing.parameter_slots("tRAS")));
  p.append_pre(R0, false, false, delay_for(timing.parameter_slots("tRP")));
  p.append_addi(R3, R3, 1);
  p.append_bl(R3, t, label);
}

}  // namespace

// ---------------------------------------------------------------- Study 1

std::vector<uint32_t> default_t_grid() {
  std::vector<uint32_t> g;
  for (uint32_t t = 1; t <= 65536; t *= 2) g.push_back(t);
  return g;
}

Program build_hammer_program(uint32_t bank, uint32_t a1, uint32_t a2, uint32_t t, uint64_t iterations,
                             const TimingConfig& timing) {
  Program p;
  p.append_li(R0, bank).append_li(R1, a1).append_li(R2, a2);
  if (iterations > 0 && t > 0) {
    p.append_li(R4, 0);
    p.append_label("ITER");
    emit_hammer_block(p, R1, t, "HAMMER1", timing);
    emit_hammer_block(p, R2, t, "HAMMER2", timing);
    p.append_addi(R4, R4, 1);
    p.append_bl(R4, static_cast<int64_t>(iterations), "ITER");
  }
  return p;
}

Program build_hammer_budget_program(uint32_t bank, uint32_t a1, uint32_t a2, uint32_t t, uint64_t acts_per_aggressor,
                                    const TimingConfig& timing) {
  if (t == 0) fail(ErrorCode::ConfigError, "interleave T must be positive");
  Program p = build_hammer_program(bank, a1, a2, t, acts_per_aggressor / t, timing);
  const uint64_t rest = acts_per_aggressor % t;
  if (rest > 0) {
    emit_hammer_block(p, R1, static_cast<uint32_t>(rest), "TAIL1", timing);
    emit_hammer_block(p, R2, static_cast<uint32_t>(rest), "TAIL2", timing);
  }
  return p;
}

double hammer_dose(VictimPosition v, uint64_t h, uint64_t t, const RowHammerConfig& rh) {
  if (h == 0) return 0.0;
  const double w = rh.base_disturb;
  const double hd = static_cast<double>(h);
  // V1 and V3 sit next to one aggressor and three rows from the other.
  if (v != VictimPosition::V2) return hd * w;
  const double switches = 2.0 * static_cast<double>(ceil_div(h, std::max<uint64_t>(t, 1))) - 1.0;
  return 2.0 * hd * w + switches * rh.alternation_bonus;
}

uint64_t hammer_count_for_dose(VictimPosition v, double threshold, uint64_t t, const RowHammerConfig& rh,
                               uint64_t limit) {
  if (!std::isfinite(threshold)) return 0;
  uint64_t hi = 1;
  while (hammer_dose(v, hi, t, rh) < threshold) {
    if (hi >= limit) return 0;
    hi = std::min(hi * 2, limit);
  }
  uint64_t lo = hi / 2;  // dose(lo) < threshold unless lo == 0
  while (hi - lo > 1) {
    const uint64_t mid = lo + (hi - lo) / 2;
    if (hammer_dose(v, mid, t, rh) >= threshold) hi = mid;
    else lo = mid;
  }
  return hi;
}

const Study1Row& Study1Result::at(uint32_t t, const std::string& victim) const {
  for (const auto& r : rows) {
    if (r.t == t && r.victim == victim) return r;
  }
  fail(ErrorCode::OutOfRange, "no Study 1 row for T=" + std::to_string(t) + " " + victim);
}

std::string Study1Result::csv() const {
  std::ostringstream os;
  os << "T,victim,flips_avg,flips_normalized,hc_first_min,acts_issued,iterations,dose\n";
  for (const auto& r : rows) {
    os << r.t << ',' << r.victim << ',' << fmt(r.flips_avg) << ',' << fmt(r.flips_normalized) << ','
       << r.hc_first_min << ',' << r.acts_issued << ',' << r.iterations << ',' << fmt(r.dose, 3) << '\n';
  }
  return os.str();
}

std::string Study1Result::summary() const {
  std::ostringstream os;
  os << "profile " << profile << '\n';
  os << std::setw(7) << "T" << std::setw(12) << "V1" << std::setw(12) << "V2" << std::setw(12) << "V3"
     << std::setw(14) << "HC_first(V2)" << '\n';
  for (const auto& r : rows) {
    if (r.victim != "V1") continue;
    os << std::setw(7) << r.t;
    for (const char* v : {"V1", "V2", "V3"}) os << std::setw(12) << fmt(at(r.t, v).flips_avg, 2);
    os << std::setw(14) << at(r.t, "V2").hc_first_min << '\n';
  }
  return os.str();
}

std::vector<uint32_t> study1_triple_bases(const Geometry& geometry, uint64_t seed, uint32_t triples, bool full_bank) {
  // V1, A1, V2, A2, V3 at base .. base+4.
  const uint32_t slots = geometry.rows_per_bank / 8;
  const uint32_t count = full_bank ? slots : std::min(triples, slots);
  std::vector<uint32_t> bases;
  for (uint32_t s : pick_slots(seed, kTripleTag, slots, count)) bases.push_back(s * 8 + 1);
  return bases;
}

Study1Result run_study1(const PlatformConfig& profile, const Study1Config& cfg) {
  require_calibrated(profile);
  const auto& geo = profile.geometry;
  if (cfg.bank >= geo.banks) fail(ErrorCode::UnknownBank, "bank " + std::to_string(cfg.bank));
  const std::vector<uint32_t> grid = cfg.t_grid.empty() ? default_t_grid() : cfg.t_grid;
  const uint64_t per_aggressor = cfg.total_acts / 2;
  const auto& rh = profile.fault.rowhammer;

  const auto bases = study1_triple_bases(geo, cfg.seed, cfg.triples, cfg.full_bank);

  DramDevice device(profile);
  const Burst victim_data = repeat_byte(0x55);
  const Burst aggressor_data = repeat_byte(0xAA);
  auto init_triple = [&](uint32_t b) {
    for (uint32_t v : {b, b + 2, b + 4}) device.host_fill_row(cfg.bank, v, victim_data);
    for (uint32_t a : {b + 1, b + 3}) device.host_fill_row(cfg.bank, a, aggressor_data);
  };

  // Onset dose per victim with the checkered data in place; independent of T.
  std::vector<std::array<double, 3>> onset(bases.size());
  for (size_t i = 0; i < bases.size(); ++i) {
    init_triple(bases[i]);
    for (uint32_t k = 0; k < 3; ++k) onset[i][k] = device.flip_onset(cfg.bank, bases[i] + 2 * k);
  }

  Study1Result result;
  result.profile = profile.name;
  // Kernel rows for the emulated run live in another bank so they never meet the tested triples.
  const uint32_t kernel_bank = (cfg.bank + 1) % geo.banks;
  const uint32_t kb = 1;
  for (uint32_t t : grid) {
    Platform platform(profile);
    const auto program = platform.assemble(
        build_hammer_budget_program(kernel_bank, kb + 1, kb + 3, t, per_aggressor, profile.timing));
    const RunReport report = platform.execute(program);
    if (report.stop != StopReason::End) {
      fail(ErrorCode::ConfigError, "hammer kernel stopped with " + std::string(stop_reason_name(report.stop)));
    }
    std::array<double, 3> dose{};
    for (uint32_t k = 0; k < 3; ++k) dose[k] = platform.device().accumulator(kernel_bank, kb + 2 * k);

    std::array<double, 3> flips{};
    std::array<uint64_t, 3> hc{};
    for (size_t i = 0; i < bases.size(); ++i) {
      const uint32_t b = bases[i];
      init_triple(b);
      for (uint32_t k = 0; k < 3; ++k) {
        device.add_disturbance(cfg.bank, b + 2 * k, dose[k]);
        flips[k] += popcount_diff(device.host_read_row(cfg.bank, b + 2 * k), victim_data[0]);
        const uint64_t h = hammer_count_for_dose(static_cast<VictimPosition>(k), onset[i][k], t, rh);
        if (h > 0 && (hc[k] == 0 || h < hc[k])) hc[k] = h;
      }
    }
    for (uint32_t k = 0; k < 3; ++k) {
      Study1Row row;
      row.t = t;
      row.victim = victim_name(static_cast<VictimPosition>(k));
      row.flips_avg = flips[k] / static_cast<double>(bases.size());
      row.hc_first_min = hc[k];
      row.acts_issued = report.histogram[static_cast<size_t>(CommandClass::ACT)];
      row.iterations = ceil_div(per_aggressor, t);
      row.dose = dose[k];
      result.rows.push_back(row);
    }
  }
  const uint32_t t_ref = *std::max_element(grid.begin(), grid.end());
  for (auto& r : result.rows) {
    const double ref = result.at(t_ref, r.victim).flips_avg;
    r.flips_normalized = ref > 0 ? r.flips_avg / ref : 0.0;
  }
  return result;
}

// ---------------------------------------------------------------- Study 2

uint32_t Study2Result::rows_with_extra_cells() const {
  return static_cast<uint32_t>(std::count(random_adds_cell.begin(), random_adds_cell.end(), true));
}

std::string Study2Result::csv() const {
  std::ostringstream os;
  os << "pattern_class,victim_init,victim_row,column,flips,flipped_bits\n";
  for (const auto& r : rows) {
    os << r.pattern_class << ',' << r.victim_init << ',' << r.victim_row << ',' << r.column << ','
       << r.flipped_bits.size() << ',';
    for (size_t i = 0; i < r.flipped_bits.size(); ++i) os << (i ? " " : "") << r.flipped_bits[i];
    os << '\n';
  }
  return os.str();
}

std::string Study2Result::summary() const {
  std::ostringstream os;
  os << "profile " << profile << " seed " << seed << ": " << rows_with_extra_cells() << " of " << victim_rows.size()
     << " victim rows gain cells under random patterns\n";
  return os.str();
}

uint64_t study2_hammers(const PlatformConfig& profile, const Study2Config& cfg) {
  if (cfg.hammers > 0) return cfg.hammers;
  auto it = profile.experiment.find("study2_hammers");
  if (it == profile.experiment.end() || it->second <= 0) {
    fail(ErrorCode::CalibrationMissing, "profile '" + profile.name + "' has no study2_hammers knob");
  }
  return static_cast<uint64_t>(it->second);
}

double study2_victim_dose(const PlatformConfig& profile, const Study2Config& cfg) {
  Platform platform(profile);
  const uint32_t kernel_bank = (cfg.bank + 1) % profile.geometry.banks;
  const auto program = platform.assemble(
      build_hammer_budget_program(kernel_bank, 1, 3, 1, study2_hammers(profile, cfg), profile.timing));
  const RunReport report = platform.execute(program);
  if (report.stop != StopReason::End) fail(ErrorCode::ConfigError, "Study 2 hammer kernel did not finish");
  return platform.device().accumulator(kernel_bank, 2);
}

Study2Result run_study2(const PlatformConfig& profile, const Study2Config& cfg) {
  require_calibrated(profile);
  const auto& geo = profile.geometry;
  if (cfg.bank >= geo.banks) fail(ErrorCode::UnknownBank, "bank " + std::to_string(cfg.bank));
  const double dose = cfg.victim_dose > 0 ? cfg.victim_dose : study2_victim_dose(profile, cfg);

  std::vector<Burst> repeated(256);
  for (uint32_t b = 0; b < 256; ++b) repeated[b] = repeat_byte(static_cast<uint8_t>(b));
  std::vector<Burst> random(cfg.random_patterns);
  {
    std::mt19937_64 rng(hash_combine({cfg.seed, kPatternTag}));
    for (auto& p : random) {
      for (auto& w : p) w = rng();
    }
  }

  Study2Result result;
  result.profile = profile.name;
  result.seed = cfg.seed;
  DramDevice device(profile);
  std::mt19937_64 col_rng(hash_combine({cfg.seed, kVictimTag, 1}));
  const uint32_t slots = geo.rows_per_bank / 8;
  for (uint32_t slot : pick_slots(cfg.seed, kVictimTag, slots, cfg.rows)) {
    const uint32_t victim = slot * 8 + 2;
    const uint32_t column = static_cast<uint32_t>(col_rng() % geo.columns_per_row);
    std::array<std::array<Burst, 2>, 2> unions{};  // [class][init]
    for (int cls = 0; cls < 2; ++cls) {
      const auto& patterns = cls == 0 ? repeated : random;
      for (int init = 0; init < 2; ++init) {
        const Burst start = repeat_byte(init ? 0xFF : 0x00);
        Burst& acc = unions[cls][init];
        for (const Burst& pattern : patterns) {
          for (uint32_t trial = 0; trial < cfg.trials; ++trial) {
            device.host_write_block(cfg.bank, victim, column, start);
            device.host_write_block(cfg.bank, victim - 1, column, pattern);
            device.host_write_block(cfg.bank, victim + 1, column, pattern);
            device.add_disturbance(cfg.bank, victim, dose);
            const Burst got = device.host_read_block(cfg.bank, victim, column);
            for (size_t w = 0; w < 8; ++w) acc[w] |= got[w] ^ start[w];
          }
        }
        Study2Row row;
        row.pattern_class = cls == 0 ? "repeated8" : "random512";
        row.victim_init = init ? "ones" : "zeros";
        row.victim_row = victim;
        row.column = column;
        for (uint16_t bit = 0; bit < 512; ++bit) {
          if (burst_bit(acc, bit)) row.flipped_bits.push_back(bit);
        }
        result.rows.push_back(std::move(row));
      }
    }
    bool extra = false;
    for (int init = 0; init < 2; ++init) {
      for (size_t w = 0; w < 8; ++w) extra |= (unions[1][init][w] & ~unions[0][init][w]) != 0;
    }
    result.victim_rows.push_back(victim);
    result.random_adds_cell.push_back(extra);
    for (uint32_t r : {victim - 1, victim, victim + 1}) device.host_reset_row(cfg.bank, r);
  }
  return result;
}

// ---------------------------------------------------------------- Study 3

Program build_majority_program(uint32_t bank, uint32_t r1, uint32_t r2, uint32_t tras_slots, uint32_t trp_slots,
                               const TimingConfig& timing) {
  Program p;
  p.append_li(R0, bank).append_li(R1, r1).append_li(R2, r2);
  p.append_act(R0, false, R1, false, delay_for(tras_slots));
  p.append_pre(R0, false, false, delay_for(trp_slots));
  p.append_act(R0, false, R2, false, delay_for(timing.parameter_slots("tRAS")));
  p.append_pre(R0, false, false, delay_for(timing.parameter_slots("tRP")));
  return p;
}

Study3Counts count_segments(const std::vector<double>& best_and, const std::vector<double>& best_or) {
  Study3Counts c;
  for (size_t s = 0; s < best_and.size(); ++s) {
    const double a = best_and[s];
    const double o = best_or[s];
    if (a < 0.03 && o >= 0.03) ++c.and_only_below_3;
    if (a < 0.03 && o < 0.03) ++c.both_below_3;
    if (a < 0.05 && o < 0.05) ++c.both_below_5;
    if (a < 0.10 && o < 0.10) ++c.both_below_10;
  }
  return c;
}

std::string Study3Result::csv() const {
  std::ostringstream os;
  os << "tras_ns,trp_ns,segment,op,ber\n";
  for (const auto& r : rows) {
    os << fmt(r.tras, 1) << ',' << fmt(r.trp, 1) << ',' << r.segment << ',' << (r.is_and ? "AND" : "OR") << ','
       << fmt(r.ber, 6) << '\n';
  }
  return os.str();
}

std::string Study3Result::summary() const {
  std::ostringstream os;
  os << "profile " << profile << ": " << best_and.size() << " segments, " << activations
     << " multi-row activations\n";
  os << "  AND-only  < 3%: " << counts.and_only_below_3 << '\n';
  os << "  AND & OR  < 3%: " << counts.both_below_3 << '\n';
  os << "  AND & OR  < 5%: " << counts.both_below_5 << '\n';
  os << "  AND & OR < 10%: " << counts.both_below_10 << '\n';
  return os.str();
}

Study3Result run_study3(const PlatformConfig& profile, const Study3Config& cfg) {
  require_calibrated(profile);
  const auto& geo = profile.geometry;
  if (cfg.bank >= geo.banks) fail(ErrorCode::UnknownBank, "bank " + std::to_string(cfg.bank));
  if (uint64_t{cfg.segments} * 4 > geo.rows_per_bank) fail(ErrorCode::UnknownRow, "too many segments for one bank");
  auto grid = [](const std::vector<double>& g) {
    if (!g.empty()) return g;
    std::vector<double> d;
    for (int i = 1; i <= 10; ++i) d.push_back(1.5 * i);
    return d;
  };
  const auto tras_grid = grid(cfg.tras_grid);
  const auto trp_grid = grid(cfg.trp_grid);
  const double slot_ns = profile.timing.bus_slot_ns;

  struct Combo {
    double tras, trp;
    AssembledProgram program;
    size_t li_r1, li_r2;
  };
  Platform platform(profile);
  platform.device().set_record_violations(false);
  DramDevice& device = platform.device();
  std::vector<Combo> combos;
  for (double tras : tras_grid) {
    for (double trp : trp_grid) {
      if (cfg.valid_only && !device.majority_timing_valid(tras, trp)) continue;
      const auto ts = static_cast<uint32_t>(std::llround(tras / slot_ns));
      const auto ps = static_cast<uint32_t>(std::llround(trp / slot_ns));
      Combo c{tras, trp, platform.assemble(build_majority_program(cfg.bank, 1, 2, ts, ps, profile.timing)), 0, 0};
      for (size_t i = 0; i < c.program.instructions.size(); ++i) {
        const auto* r = std::get_if<RegularInstruction>(&c.program.instructions[i]);
        if (!r || r->opcode != RegularOpcode::LI) continue;
        if (r->rd == R1) c.li_r1 = i;
        if (r->rd == R2) c.li_r2 = i;
      }
      combos.push_back(std::move(c));
    }
  }
  auto set_li = [](AssembledProgram& p, size_t index, uint32_t value) {
    std::get<RegularInstruction>(p.instructions[index]).imm = static_cast<int32_t>(value);
  };

  Study3Result result;
  result.profile = profile.name;
  result.best_and.assign(cfg.segments, 1.0);
  result.best_or.assign(cfg.segments, 1.0);
  const size_t words = geo.words_per_row();
  const double bits = geo.bits_per_row();
  std::vector<uint64_t> a(words), b(words), expected(words);
  const std::vector<uint64_t> zeros(words, 0), ones(words, ~uint64_t{0});
  const uint64_t mra_start = device.multi_row_activations();

  for (uint32_t s = 0; s < cfg.segments; ++s) {
    const uint32_t r0 = s * 4;
    for (int op = 0; op < 2; ++op) {
      const bool is_and = op == 0;
      std::mt19937_64 rng(hash_combine({cfg.seed, kOperandTag, cfg.bank, s, static_cast<uint64_t>(op)}));
      for (size_t w = 0; w < words; ++w) {
        a[w] = rng();
        b[w] = rng();
        expected[w] = is_and ? (a[w] & b[w]) : (a[w] | b[w]);
      }
      bool dirty = true;
      for (auto& c : combos) {
        if (dirty) {
          // AND: row 0 holds zeros, operands in rows 1 and 2. OR: row 1 holds ones, operands in rows 0 and 2.
          device.host_write_row(cfg.bank, r0, is_and ? zeros : a);
          device.host_write_row(cfg.bank, r0 + 1, is_and ? a : ones);
          device.host_write_row(cfg.bank, r0 + 2, b);
          dirty = false;
        }
        set_li(c.program, c.li_r1, r0 + 1);
        set_li(c.program, c.li_r2, r0 + 2);
        const uint64_t before = device.multi_row_activations();
        platform.execute(c.program);
        double ber = 1.0;
        if (device.multi_row_activations() != before) {
          ber = popcount_diff_rows(device.host_read_row(cfg.bank, r0), expected) / bits;
          dirty = true;
        }
        double& best = is_and ? result.best_and[s] : result.best_or[s];
        best = std::min(best, ber);
        result.rows.push_back({c.tras, c.trp, s, is_and, ber});
      }
    }
    for (uint32_t r = r0; r < r0 + 4; ++r) device.host_reset_row(cfg.bank, r);
  }
  result.activations = device.multi_row_activations() - mra_start;
  result.counts = count_segments(result.best_and, result.best_or);
  return result;
}

}  // namespace dbender
