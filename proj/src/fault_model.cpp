#include "dbender/fault_model.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

namespace dbender {

namespace {

constexpr uint64_t kWeakTag = 0x5745414bULL;
constexpr uint64_t kSegmentTag = 0x5345474dULL;
constexpr uint64_t kRetentionTag = 0x52455445ULL;

double unit_uniform(std::mt19937_64& rng) {
  // 53-bit mantissa in (0, 1).
  return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

// Distinct positions in [0, n), returned in increasing order.
std::vector<uint32_t> distinct_positions(std::mt19937_64& rng, uint32_t n, uint32_t k) {
  std::vector<bool> taken(n, false);
  std::vector<uint32_t> out;
  out.reserve(k);
  k = std::min(k, n);
  while (out.size() < k) {
    const auto p = static_cast<uint32_t>(rng() % n);
    if (taken[p]) continue;
    taken[p] = true;
    out.push_back(p);
  }
  return out;
}

}  // namespace

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t hash_combine(std::initializer_list<uint64_t> values) {
  uint64_t h = 0x243f6a8885a308d3ULL;
  for (uint64_t v : values) h = mix64(h ^ mix64(v));
  return h;
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

double normal_cdf(double z) { return boost::math::cdf(boost::math::normal(), z); }

Burst repeat_byte(uint8_t value) {
  Burst b;
  b.fill(0x0101010101010101ULL * value);
  return b;
}

std::shared_ptr<const WeakCellList> generate_weak_cells(const ThresholdModel& model, const Geometry& geometry,
                                                        uint64_t seed, uint32_t bank, uint32_t row) {
  std::mt19937_64 rng(hash_combine({seed, kWeakTag, bank, row}));
  const uint32_t n = geometry.bits_per_row();
  std::binomial_distribution<uint32_t> bulk_count(n, model.weak_fraction);
  std::binomial_distribution<uint32_t> tail_count(n, model.tail_fraction);
  const uint32_t kb = model.weak_fraction > 0 ? bulk_count(rng) : 0;
  const uint32_t kt = model.tail_fraction > 0 ? tail_count(rng) : 0;
  auto positions = distinct_positions(rng, n, kb + kt);

  auto list = std::make_shared<WeakCellList>();
  list->cells.reserve(positions.size());
  const double span = model.median - model.min;
  for (size_t i = 0; i < positions.size(); ++i) {
    double threshold;
    if (i < kb) {
      const double z = normal_quantile(unit_uniform(rng) * model.weak_fraction);
      threshold = model.min + span * std::exp(model.shape * z);
    } else {
      const double z = normal_quantile(unit_uniform(rng));
      threshold = model.min * std::exp(model.tail_spread * std::fabs(z));
    }
    const uint64_t r = rng();
    WeakCell cell;
    cell.threshold = static_cast<float>(threshold);
    cell.column = static_cast<uint16_t>(positions[i] / geometry.transfer_bits);
    cell.bit = static_cast<uint16_t>(positions[i] % geometry.transfer_bits);
    cell.gate = static_cast<uint8_t>(r & 7);
    cell.side = static_cast<uint8_t>((r >> 3) & 1);
    list->cells.push_back(cell);
  }
  std::sort(list->cells.begin(), list->cells.end(), [](const WeakCell& a, const WeakCell& b) {
    if (a.column != b.column) return a.column < b.column;
    if (a.threshold != b.threshold) return a.threshold < b.threshold;
    return a.bit < b.bit;
  });
  list->column_begin.assign(geometry.columns_per_row + 1, 0);
  size_t idx = 0;
  for (uint32_t c = 0; c <= geometry.columns_per_row; ++c) {
    while (idx < list->cells.size() && list->cells[idx].column < c) ++idx;
    list->column_begin[c] = static_cast<uint32_t>(idx);
  }
  return list;
}

std::pair<double, double> segment_normals(uint64_t seed, uint32_t bank, uint32_t segment) {
  std::mt19937_64 rng(hash_combine({seed, kSegmentTag, bank, segment}));
  const double z1 = normal_quantile(unit_uniform(rng));
  const double z2 = normal_quantile(unit_uniform(rng));
  return {z1, z2};
}

SegmentErrorRates segment_error_rates(const MajorityConfig& cfg, uint64_t seed, uint32_t bank, uint32_t segment) {
  const auto [z1, z2] = segment_normals(seed, bank, segment);
  const auto& a = cfg.and_error;
  const auto& g = cfg.or_gap;
  SegmentErrorRates r;
  r.and_rate = std::clamp(a.floor + (a.median - a.floor) * std::exp(a.shape * z1), 0.0, 1.0);
  const double gap = g.floor + (g.median - g.floor) * std::exp(g.shape * z2);
  r.or_rate = std::clamp(r.and_rate + std::max(gap, 0.0), r.and_rate, 1.0);
  return r;
}

std::vector<RetentionCell> generate_retention_cells(const RetentionConfig& cfg, const Geometry& geometry,
                                                    uint64_t seed, uint32_t bank, uint32_t row) {
  std::mt19937_64 rng(hash_combine({seed, kRetentionTag, bank, row}));
  const uint32_t n = geometry.bits_per_row();
  std::binomial_distribution<uint32_t> count(n, cfg.weak_fraction);
  const uint32_t k = cfg.weak_fraction > 0 ? count(rng) : 0;
  std::vector<RetentionCell> out;
  for (uint32_t p : distinct_positions(rng, n, k)) {
    const double z = normal_quantile(unit_uniform(rng));
    out.push_back({static_cast<float>(cfg.median_ms * std::exp(cfg.shape * z)), p, (rng() & 1) != 0});
  }
  return out;
}

}  // namespace dbender
