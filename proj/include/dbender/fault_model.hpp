#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <utility>
#include <vector>

#include "dbender/config.hpp"

namespace dbender {

using Burst = std::array<uint64_t, 8>;

uint64_t mix64(uint64_t x);
uint64_t hash_combine(std::initializer_list<uint64_t> values);
// Standard normal quantile.
double normal_quantile(double p);
double normal_cdf(double z);

inline bool burst_bit(const Burst& b, unsigned bit) { return (b[bit >> 6] >> (bit & 63)) & 1; }

Burst repeat_byte(uint8_t value);

// A RowHammer-susceptible cell. Its flip needs the accumulated dose to reach
// threshold and the coupled neighbour's bits at lanes (j-1, j, j+1), same bit
// offset, to equal gate (bit 2 = lane j-1). The cell then takes the neighbour's lane-j bit.
struct WeakCell {
  float threshold;
  uint16_t column;
  uint16_t bit;
  uint8_t gate;
  // 0: coupled to row - 1, 1: coupled to row + 1.
  uint8_t side;
};

struct WeakCellList {
  std::vector<WeakCell> cells;  // sorted by (column, threshold)
  std::vector<uint32_t> column_begin;  // columns + 1 entries
};

// Deterministic per (seed, bank, row).
std::shared_ptr<const WeakCellList> generate_weak_cells(const ThresholdModel& model, const Geometry& geometry,
                                                        uint64_t seed, uint32_t bank, uint32_t row);

// Gate window of the coupled neighbour for a cell at `bit` in a 512-bit block.
inline unsigned gate_window(const Burst& neighbour, unsigned bit) {
  const unsigned lane = bit >> 3;
  const unsigned k = bit & 7;
  const unsigned left = ((lane + 63) & 63) * 8 + k;
  const unsigned right = ((lane + 1) & 63) * 8 + k;
  return (burst_bit(neighbour, left) << 2) | (burst_bit(neighbour, bit) << 1) | burst_bit(neighbour, right);
}

struct SegmentErrorRates {
  double and_rate = 0.0;
  double or_rate = 0.0;
};
// The two standard normal draws behind a segment's error rates.
std::pair<double, double> segment_normals(uint64_t seed, uint32_t bank, uint32_t segment);
SegmentErrorRates segment_error_rates(const MajorityConfig& cfg, uint64_t seed, uint32_t bank, uint32_t segment);

struct RetentionCell {
  float t_ret_ms;
  uint32_t position;
  bool anti;
};
std::vector<RetentionCell> generate_retention_cells(const RetentionConfig& cfg, const Geometry& geometry,
                                                    uint64_t seed, uint32_t bank, uint32_t row);

}  // namespace dbender
