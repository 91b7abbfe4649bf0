#include <algorithm>
#include <bit>
#include <functional>
#include <random>
#include <cmath>
#include <sstream>

#include "dbender/error.hpp"
#include "dbender/experiments.hpp"
#include "dbender/fault_model.hpp"

namespace dbender {

namespace {

constexpr uint64_t kStudy1Acts = uint64_t{1} << 20;

std::string num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

struct Log {
  std::vector<std::string>& lines;
  const std::function<void(const std::string&)>& progress;
  void push_back(const std::string& line) {
    lines.push_back(line);
    if (progress) progress(line);
  }
};

struct Endpoints {
  double onset_min = 0.0;
  double flips_t1 = 0.0;
  double flips_t64k = 0.0;
};

// V2 onset and endpoint flip averages over the Study 1 triples, replaying closed-form doses.
Endpoints measure_endpoints(const PlatformConfig& cfg, const std::vector<uint32_t>& bases, double d1, double d64) {
  DramDevice device(cfg);
  const Burst victim = repeat_byte(0x55);
  const Burst aggressor = repeat_byte(0xAA);
  auto init = [&](uint32_t b) {
    for (uint32_t v : {b, b + 2, b + 4}) device.host_fill_row(0, v, victim);
    for (uint32_t a : {b + 1, b + 3}) device.host_fill_row(0, a, aggressor);
  };
  auto flips = [&](uint32_t row) {
    uint32_t n = 0;
    for (uint64_t w : device.host_read_row(0, row)) n += static_cast<uint32_t>(std::popcount(w ^ victim[0]));
    return n;
  };
  Endpoints e;
  e.onset_min = INFINITY;
  for (uint32_t b : bases) {
    init(b);
    e.onset_min = std::min(e.onset_min, device.flip_onset(0, b + 2));
    device.add_disturbance(0, b + 2, d1);
    e.flips_t1 += flips(b + 2);
    init(b);
    device.add_disturbance(0, b + 2, d64);
    e.flips_t64k += flips(b + 2);
  }
  e.flips_t1 /= static_cast<double>(bases.size());
  e.flips_t64k /= static_cast<double>(bases.size());
  return e;
}

void fit_rowhammer(PlatformConfig& cfg, const Study1Targets& t, const CalibrationOptions& opt,
                   Log& log) {
  if (!(t.flips_t1 > t.flips_t64k && t.flips_t64k > 0)) {
    fail(ErrorCode::FitDiverged, "Study 1 flip targets must fall with T and stay positive");
  }
  // At T = 64K the number of aggressor switches depends on how many iterations reach the onset.
  const double k = 2.0 * std::ceil(t.hc_t64k / 65536.0) - 1.0;
  const double denom = 2.0 * t.hc_t1 - 1.0 - k;
  if (!(t.hc_t64k > t.hc_t1) || denom <= 0) fail(ErrorCode::FitDiverged, "HC_first targets must rise with T");
  auto& rh = cfg.fault.rowhammer;
  rh.enabled = true;
  rh.base_disturb = 1.0;
  rh.alternation_bonus = 2.0 * (t.hc_t64k - t.hc_t1) / denom;
  const double theta = 2.0 * t.hc_t64k + k * rh.alternation_bonus;
  const double d1 = hammer_dose(VictimPosition::V2, kStudy1Acts / 2, 1, rh);
  const double d64 = hammer_dose(VictimPosition::V2, kStudy1Acts / 2, 65536, rh);
  log.push_back("beta " + num(rh.alternation_bonus) + ", onset target " + num(theta) + ", doses " + num(d1) + " / " +
                num(d64));

  const double gated = cfg.geometry.bits_per_row() / 8.0;
  const double p1 = t.flips_t1 / gated;
  const double p64 = t.flips_t64k / gated;
  auto& tm = rh.threshold;
  tm.weak_fraction = std::max(1.5 * p1, 0.035);
  tm.tail_fraction = 5.0e-6;
  tm.tail_spread = 0.1;
  tm.min = theta / 1.05;

  const auto bases = study1_triple_bases(cfg.geometry, opt.study_seed, opt.triples, false);
  double q1 = p1, q64 = p64;
  for (int iter = 0; iter < 24; ++iter) {
    auto tail = [&](double d) { return tm.tail_fraction * (2.0 * normal_cdf(std::log(d / tm.min) / tm.tail_spread) - 1.0); };
    const double b1 = q1 - tail(d1);
    const double b64 = q64 - tail(d64);
    if (!(b64 > 0 && b1 > b64 && b1 < tm.weak_fraction)) fail(ErrorCode::FitDiverged, "bulk fractions out of range");
    const double z1 = normal_quantile(b1);
    const double z64 = normal_quantile(b64);
    tm.shape = (std::log(d1 - tm.min) - std::log(d64 - tm.min)) / (z1 - z64);
    tm.median = tm.min + (d64 - tm.min) * std::exp(-tm.shape * z64);

    const Endpoints e = measure_endpoints(cfg, bases, d1, d64);
    log.push_back("iter " + std::to_string(iter) + ": min " + num(tm.min) + " median " + num(tm.median) + " shape " +
                  num(tm.shape) + " -> onset " + num(e.onset_min) + " flips " + num(e.flips_t1) + " / " +
                  num(e.flips_t64k));
    const bool done = std::fabs(e.onset_min / theta - 1.0) < 1e-5 && std::fabs(e.flips_t1 / t.flips_t1 - 1.0) < 0.002 &&
                      std::fabs(e.flips_t64k / t.flips_t64k - 1.0) < 0.002;
    if (done) return;
    if (!std::isfinite(e.onset_min) || e.flips_t1 <= 0 || e.flips_t64k <= 0) {
      fail(ErrorCode::FitDiverged, "no flips in the calibration population");
    }
    tm.min *= theta / e.onset_min;
    q1 *= t.flips_t1 / e.flips_t1;
    q64 *= t.flips_t64k / e.flips_t64k;
  }
  fail(ErrorCode::FitDiverged, "RowHammer threshold fit did not converge");
}

void set_study2_dose(PlatformConfig& cfg, const CalibrationOptions& opt, Log& log) {
  const auto& rh = cfg.fault.rowhammer;
  const auto& tm = rh.threshold;
  if (opt.study2_weak_fraction >= tm.weak_fraction) fail(ErrorCode::FitDiverged, "Study 2 fraction above bulk");
  const double dose = tm.min + (tm.median - tm.min) * std::exp(tm.shape * normal_quantile(opt.study2_weak_fraction));
  const uint64_t h = hammer_count_for_dose(VictimPosition::V2, dose, 1, rh);
  if (h == 0) fail(ErrorCode::FitDiverged, "Study 2 dose out of reach");
  cfg.experiment["study2_hammers"] = static_cast<double>(h);
  log.push_back("study2_hammers " + std::to_string(h));
}

// ---- majority ----

// Segment draws plus stand-in sampling noise for the best-of-N measured BER.
struct Latent {
  std::vector<double> z1, z2;
  std::vector<std::array<double, 2>> noise;  // min over timing pairs of N(0,1), per op
  double bits = 65536.0;
};

Study3Counts latent_counts(const MajorityConfig& m, const Latent& z) {
  std::vector<double> a(z.z1.size()), o(z.z1.size());
  auto measured = [&](double eps, double n) {
    return std::max(0.0, eps + n * std::sqrt(eps * (1.0 - eps) / z.bits));
  };
  for (size_t s = 0; s < a.size(); ++s) {
    const double ea = std::clamp(
        m.and_error.floor + (m.and_error.median - m.and_error.floor) * std::exp(m.and_error.shape * z.z1[s]), 0.0, 1.0);
    const double gap = m.or_gap.floor + (m.or_gap.median - m.or_gap.floor) * std::exp(m.or_gap.shape * z.z2[s]);
    const double eo = std::clamp(ea + std::max(gap, 0.0), ea, 1.0);
    a[s] = measured(ea, z.noise[s][0]);
    o[s] = measured(eo, z.noise[s][1]);
  }
  return count_segments(a, o);
}

// Centre of the parameter interval where count(x) == target; count is non-increasing in x.
double plateau(const std::function<uint32_t(double)>& count, double lo, double hi, double target) {
  auto boundary = [&](double tgt) {
    double a = lo, b = hi;  // count(a) > tgt >= count(b)
    for (int i = 0; i < 40; ++i) {
      const double m = 0.5 * (a + b);
      if (count(m) > tgt) a = m;
      else b = m;
    }
    return b;
  };
  const double x_hi = boundary(target - 0.5);
  const double x_lo = boundary(target + 0.5);
  return 0.5 * (x_lo + x_hi);
}

// Latent counts for a given AND shape after alternating the median solves; returns |both<5% - t5|.
double solve_for_shape(MajorityConfig& m, const Latent& z, double shape, double t3, double t5, double t10) {
  m.and_error.shape = shape;
  for (int round = 0; round < 4; ++round) {
    m.and_error.median = plateau(
        [&](double x) {
          m.and_error.median = x;
          return latent_counts(m, z).and_only_below_3;
        },
        m.and_error.floor + 1e-6, 0.5, t3);
    m.or_gap.median = plateau(
        [&](double x) {
          m.or_gap.median = x;
          return latent_counts(m, z).both_below_10;
        },
        m.or_gap.floor + 1e-6, 0.5, t10);
  }
  return std::fabs(latent_counts(m, z).both_below_5 - t5);
}

void solve_latent(MajorityConfig& m, const Latent& z, double t3, double t5, double t10) {
  double best = 0.0, best_err = INFINITY;
  for (double s = 0.1; s <= 1.5 + 1e-9; s += 0.05) {
    const double err = solve_for_shape(m, z, s, t3, t5, t10);
    if (err < best_err) {
      best_err = err;
      best = s;
    }
  }
  // Golden-section refinement around the best grid point.
  double lo = std::max(0.05, best - 0.05), hi = best + 0.05;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int i = 0; i < 25; ++i) {
    const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    if (solve_for_shape(m, z, x1, t3, t5, t10) <= solve_for_shape(m, z, x2, t3, t5, t10)) hi = x2;
    else lo = x1;
  }
  const double refined = 0.5 * (lo + hi);
  if (solve_for_shape(m, z, refined, t3, t5, t10) > best_err) solve_for_shape(m, z, best, t3, t5, t10);
}

void fit_majority(PlatformConfig& cfg, const Study3Targets& t, const CalibrationOptions& opt,
                  Log& log) {
  if (!(t.both_below_5 <= t.both_below_10 && t.both_below_10 <= opt.segments && t.and_only_below_3 <= opt.segments)) {
    fail(ErrorCode::FitDiverged, "Study 3 count targets are inconsistent");
  }
  auto& m = cfg.fault.majority;
  m.valid_timings = {{1.5, 1.5}, {1.5, 3.0}, {3.0, 1.5}};
  m.and_error.floor = 0.022;
  m.or_gap.floor = 0.005;
  m.or_gap.shape = 1.0;

  Latent z;
  for (uint32_t s = 0; s < opt.segments; ++s) {
    const auto n = segment_normals(cfg.fault.seed, 0, s);
    z.z1.push_back(n.first);
    z.z2.push_back(n.second);
  }
  z.bits = cfg.geometry.bits_per_row();
  {
    std::mt19937_64 rng(hash_combine({opt.study_seed, 0x4e4f4953ULL}));
    std::normal_distribution<double> nd;
    const size_t pairs = m.valid_timings.size();
    for (uint32_t s = 0; s < opt.segments; ++s) {
      std::array<double, 2> n{INFINITY, INFINITY};
      for (auto& v : n) {
        for (size_t k = 0; k < pairs; ++k) v = std::min(v, nd(rng));
      }
      z.noise.push_back(n);
    }
  }

  Study3Config sc;
  sc.segments = opt.segments;
  sc.valid_only = true;
  auto measure = [&] { return run_study3(cfg, sc).counts; };
  auto describe = [](const Study3Counts& c) {
    return std::to_string(c.and_only_below_3) + " / " + std::to_string(c.both_below_5) + " / " +
           std::to_string(c.both_below_10);
  };
  auto within = [&](const Study3Counts& c) {
    return c.and_only_below_3 == t.and_only_below_3 &&
           std::abs(int(c.both_below_5) - int(t.both_below_5)) * 50 <= int(t.both_below_5) &&
           std::abs(int(c.both_below_10) - int(t.both_below_10)) * 100 <= int(t.both_below_10);
  };

  double t3 = t.and_only_below_3, t5 = t.both_below_5, t10 = t.both_below_10;
  solve_latent(m, z, t3, t5, t10);
  const double shape = m.and_error.shape;
  Study3Counts c{};
  for (int iter = 0; iter < 6; ++iter) {
    if (iter > 0) solve_for_shape(m, z, shape, t3, t5, t10);
    c = measure();
    log.push_back("majority iter " + std::to_string(iter) + ": and median " + num(m.and_error.median) + " shape " +
                  num(m.and_error.shape) + " gap median " + num(m.or_gap.median) + " -> latent " +
                  describe(latent_counts(m, z)) + ", measured " + describe(c));
    if (within(c)) return;
    auto step = [](double& tl, double target, double got) {
      tl = std::clamp(tl + 0.7 * (target - got), 0.5 * target, 1.5 * target);
    };
    step(t3, t.and_only_below_3, c.and_only_below_3);
    step(t10, t.both_below_10, c.both_below_10);
  }

  // Pin the AND-only count on measured BERs; it falls as the AND median rises.
  double lo = m.and_error.median * 0.97, hi = m.and_error.median * 1.03;
  for (int i = 0; i < 16 && c.and_only_below_3 != t.and_only_below_3; ++i) {
    m.and_error.median = 0.5 * (lo + hi);
    c = measure();
    log.push_back("pin and median " + num(m.and_error.median) + " -> " + describe(c));
    if (c.and_only_below_3 > t.and_only_below_3) lo = m.and_error.median;
    else hi = m.and_error.median;
  }
  if (!within(c)) fail(ErrorCode::FitDiverged, "majority error fit did not converge: " + describe(c));
}

}  // namespace

CalibrationTargets default_targets(const std::string& profile_id) {
  CalibrationTargets t;
  if (profile_id == "mfrA") t.study1 = Study1Targets{314.8, 31.9, 99000, 130000};
  else if (profile_id == "mfrB") {
    t.study1 = Study1Targets{50.7, 9.9, 80000, 108000};
    t.study3 = Study3Targets{};
  } else if (profile_id == "mfrC") t.study1 = Study1Targets{604.9, 71.2, 16000, 23000};
  else fail(ErrorCode::ConfigError, "no calibration targets for profile '" + profile_id + "'");
  return t;
}

CalibrationReport calibrate(const PlatformConfig& base, const CalibrationTargets& targets,
                            const CalibrationOptions& options) {
  CalibrationReport report;
  report.config = base;
  PlatformConfig& cfg = report.config;
  cfg.fault.calibrated = true;
  Log log{report.log, options.progress};
  if (targets.study1) {
    fit_rowhammer(cfg, *targets.study1, options, log);
    set_study2_dose(cfg, options, log);
  }
  if (targets.study3) fit_majority(cfg, *targets.study3, options, log);
  return report;
}

}  // namespace dbender
