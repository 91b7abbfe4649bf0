#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "dbender/config.hpp"

namespace dbender {

// Bank id used by device-wide commands (PREA, REF, ZQS).
inline constexpr uint32_t kAllBanks = 0xFFFFFFFFu;

struct TimedCommand {
  int64_t slot = 0;
  CommandClass cls = CommandClass::ACT;
  uint32_t bank = 0;
  uint32_t pc = 0;
};

enum class ViolationKind : uint8_t { Timing, State };

enum class StateIssue : uint16_t {
  ActOnOpenBank,
  AccessClosedBank,
  RefreshWithOpenBank,
  ZqsWithOpenBank,
  CommandInSelfRefresh,
};
std::string_view state_issue_name(StateIssue issue);

struct Violation {
  ViolationKind kind = ViolationKind::Timing;
  // Timing: index into TimingConfig::rules. State: StateIssue.
  uint16_t code = 0;
  CommandClass prev_cmd = CommandClass::ACT;
  CommandClass cur_cmd = CommandClass::ACT;
  uint32_t bank = 0;
  int64_t prev_slot = 0;
  int64_t cur_slot = 0;
  uint32_t prev_pc = 0;
  uint32_t cur_pc = 0;

  friend bool operator==(const Violation&, const Violation&) = default;
};

bool scope_matches(RuleScope scope, uint32_t prev_bank, uint32_t cur_bank);
int64_t rule_min_slots(const TimingRule& rule, double bus_slot_ns);

// Every rule whose (history entry, cmd) pair is closer than its minimum delay.
std::vector<Violation> check_timing(std::span<const TimedCommand> history, const TimedCommand& cmd,
                                    const TimingConfig& timing);

// Streaming form used by the device: per-class windows scanned newest first.
class TimingChecker {
 public:
  explicit TimingChecker(const TimingConfig& timing);

  // Appends cmd to the history; violations are passed to sink.
  template <typename Sink>
  void observe(const TimedCommand& cmd, Sink&& sink) {
    for (const auto& r : by_next_[static_cast<size_t>(cmd.cls)]) {
      const auto& hist = history_[static_cast<size_t>(r.prev)];
      for (auto it = hist.rbegin(); it != hist.rend(); ++it) {
        if (cmd.slot - it->slot >= r.min_slots) break;
        if (scope_matches(r.scope, it->bank, cmd.bank)) {
          sink(Violation{ViolationKind::Timing, r.index, r.prev, cmd.cls, cmd.bank, it->slot, cmd.slot, it->pc, cmd.pc});
        }
      }
    }
    auto& mine = history_[static_cast<size_t>(cmd.cls)];
    mine.push_back({cmd.slot, cmd.bank, cmd.pc});
    while (!mine.empty() && cmd.slot - mine.front().slot >= window_) mine.pop_front();
  }

  void reset();
  int64_t window() const { return window_; }

 private:
  struct CompiledRule {
    uint16_t index;
    CommandClass prev;
    RuleScope scope;
    int64_t min_slots;
  };
  struct Entry {
    int64_t slot;
    uint32_t bank;
    uint32_t pc;
  };
  std::array<std::vector<CompiledRule>, kCommandClassCount> by_next_;
  std::array<std::deque<Entry>, kCommandClassCount> history_;
  int64_t window_ = 1;
};

std::string violation_csv_header();
std::string violation_csv_line(const Violation& v, const TimingConfig& timing);

}  // namespace dbender
