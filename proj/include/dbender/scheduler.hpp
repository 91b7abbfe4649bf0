#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "dbender/config.hpp"
#include "dbender/device.hpp"

namespace dbender {

// Listed in arbitration priority order.
enum class PeriodicOp : uint8_t { Refresh, Zqs, PeriodicRead };
inline constexpr int kPeriodicOpCount = 3;
std::string_view periodic_op_name(PeriodicOp op);

struct CannedCommand {
  DeviceCommand cmd;
  // Bus slots after the injection point.
  int64_t offset = 0;
};

struct Injection {
  PeriodicOp op = PeriodicOp::Refresh;
  int64_t slot = 0;
};

class PeriodicScheduler {
 public:
  explicit PeriodicScheduler(const PlatformConfig& config);

  void set_enabled(PeriodicOp op, bool on);
  bool enabled(PeriodicOp op) const { return entries_[index(op)].enabled; }
  int64_t period_slots(PeriodicOp op) const { return entries_[index(op)].period; }

  // Highest priority operation due at or before `slot`.
  std::optional<PeriodicOp> due(int64_t slot) const;
  // Earliest due slot over enabled operations; INT64_MAX when none.
  int64_t next_due() const;
  void complete(PeriodicOp op);
  // Drops every deadline at or before `slot`; used on self-refresh exit.
  void skip_until(int64_t slot);

  const std::vector<CannedCommand>& program(PeriodicOp op) const { return entries_[index(op)].program; }
  // Bus slots the injected sequence keeps the command bus busy.
  int64_t span_slots(PeriodicOp op) const { return entries_[index(op)].span; }

  void reset();

 private:
  struct Entry {
    bool enabled = false;
    int64_t period = 0;
    int64_t next = 0;
    int64_t span = 0;
    std::vector<CannedCommand> program;
  };
  static size_t index(PeriodicOp op) { return static_cast<size_t>(op); }
  std::array<Entry, kPeriodicOpCount> entries_;
};

}  // namespace dbender
