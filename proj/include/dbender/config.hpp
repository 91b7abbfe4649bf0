#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dbender {

struct Geometry {
  uint32_t banks = 16;
  uint32_t rows_per_bank = 32768;
  // In 512-bit transfer units. Column addresses step by 8 per transfer.
  uint32_t columns_per_row = 128;
  uint32_t transfer_bits = 512;

  uint32_t column_addresses() const { return columns_per_row * 8; }
  uint32_t bits_per_row() const { return columns_per_row * transfer_bits; }
  uint32_t words_per_row() const { return columns_per_row * 8; }
};

enum class CommandClass : uint8_t { ACT, PRE, READ, WRITE, REF, ZQS };
inline constexpr int kCommandClassCount = 6;
std::string_view command_class_name(CommandClass c);
std::optional<CommandClass> parse_command_class(std::string_view text);

// different_bank covers tRRD (consecutive ACTs to two distinct banks).
enum class RuleScope : uint8_t { SameBank, SameDevice, DifferentBank };
std::string_view rule_scope_name(RuleScope s);

struct TimingRule {
  std::string name;
  CommandClass prev = CommandClass::ACT;
  CommandClass next = CommandClass::ACT;
  RuleScope scope = RuleScope::SameBank;
  double min_ns = 0.0;
};

struct TimingConfig {
  double bus_slot_ns = 1.5;
  std::map<std::string, double> parameters;
  std::vector<TimingRule> rules;

  double parameter(const std::string& name) const;
  int64_t parameter_slots(const std::string& name) const;
  int64_t to_slots(double ns) const;
};

// Bulk cells: threshold = min + (median - min) * exp(shape * z) with z drawn from the
// lower `weak_fraction` quantile of N(0,1). Tail cells (fraction tail_fraction):
// threshold = min * exp(tail_spread * |z|).
struct ThresholdModel {
  double min = 1.0e5;
  double median = 1.0e7;
  double shape = 1.0;
  double weak_fraction = 0.1;
  double tail_fraction = 0.0;
  double tail_spread = 0.1;
};

struct RowHammerConfig {
  bool enabled = true;
  double base_disturb = 1.0;
  double distance2_ratio = 0.25;
  double alternation_bonus = 0.0;
  bool data_pattern_gate = true;
  ThresholdModel threshold;
};

// eps = floor + (median - floor) * exp(shape * z), clamped to [0, 1].
struct EpsilonModel {
  double floor = 0.0;
  double median = 0.0;
  double shape = 0.0;
};

struct MajorityConfig {
  double tras_threshold_ns = 3.0;
  double trp_threshold_ns = 3.0;
  std::vector<std::pair<double, double>> valid_timings;
  EpsilonModel and_error;
  // eps_or = eps_and + gap; gap >= 0 keeps eps_and <= eps_or per segment.
  EpsilonModel or_gap;
};

struct RetentionConfig {
  bool enabled = false;
  double weak_fraction = 1.0e-5;
  double median_ms = 2000.0;
  double shape = 1.0;
};

struct FaultModelConfig {
  uint64_t seed = 1;
  bool calibrated = false;
  double temperature_c = 50.0;
  RowHammerConfig rowhammer;
  MajorityConfig majority;
  RetentionConfig retention;
};

struct SchedulerConfig {
  bool refresh_enabled = false;
  bool zqs_enabled = false;
  bool periodic_read_enabled = false;
  double refresh_period_ns = 7800.0;
  double zqs_period_ns = 128.0e6;
  double periodic_read_period_ns = 1.0e6;
};

struct PlatformConfig {
  std::string name = "ddr4_default";
  std::string standard = "DDR4";
  std::string origin;
  Geometry geometry;
  TimingConfig timing;
  FaultModelConfig fault;
  std::array<double, kCommandClassCount> energy{};
  SchedulerConfig scheduler;
  size_t instruction_capacity = 2048;
  size_t scratchpad_words = 1024;
  size_t fifo_capacity = 512;
  uint32_t drain_numerator = 1;
  uint32_t drain_denominator = 4;
  uint32_t rows_per_ref = 4;
  // Per-profile experiment knobs, e.g. "study2_hammers".
  std::map<std::string, double> experiment;
};

// Accepts a file path or a profile id resolved against the config directory.
PlatformConfig load_config(const std::string& path_or_id);
PlatformConfig parse_config_text(const std::string& json_text, const std::string& origin);
std::string config_to_json(const PlatformConfig& cfg);
std::string resolve_profile_path(const std::string& path_or_id);
std::string config_directory();

}  // namespace dbender
