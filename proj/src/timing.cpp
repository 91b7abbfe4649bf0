#include "dbender/timing.hpp"

#include <cmath>
#include <sstream>

namespace dbender {

std::string_view state_issue_name(StateIssue issue) {
  switch (issue) {
    case StateIssue::ActOnOpenBank: return "state:act_open_bank";
    case StateIssue::AccessClosedBank: return "state:access_closed_bank";
    case StateIssue::RefreshWithOpenBank: return "state:ref_open_bank";
    case StateIssue::ZqsWithOpenBank: return "state:zqs_open_bank";
    case StateIssue::CommandInSelfRefresh: return "state:self_refresh";
  }
  return "state:?";
}

bool scope_matches(RuleScope scope, uint32_t prev_bank, uint32_t cur_bank) {
  switch (scope) {
    case RuleScope::SameDevice: return true;
    case RuleScope::SameBank: return prev_bank == cur_bank || prev_bank == kAllBanks || cur_bank == kAllBanks;
    case RuleScope::DifferentBank: return prev_bank != kAllBanks && cur_bank != kAllBanks && prev_bank != cur_bank;
  }
  return false;
}

int64_t rule_min_slots(const TimingRule& rule, double bus_slot_ns) {
  return static_cast<int64_t>(std::ceil(rule.min_ns / bus_slot_ns - 1e-9));
}

std::vector<Violation> check_timing(std::span<const TimedCommand> history, const TimedCommand& cmd,
                                    const TimingConfig& timing) {
  std::vector<Violation> out;
  for (size_t i = 0; i < timing.rules.size(); ++i) {
    const auto& rule = timing.rules[i];
    if (rule.next != cmd.cls) continue;
    const int64_t min_slots = rule_min_slots(rule, timing.bus_slot_ns);
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
      if (it->cls != rule.prev) continue;
      if (cmd.slot - it->slot >= min_slots) continue;
      if (!scope_matches(rule.scope, it->bank, cmd.bank)) continue;
      out.push_back({ViolationKind::Timing, static_cast<uint16_t>(i), rule.prev, cmd.cls, cmd.bank, it->slot, cmd.slot,
                     it->pc, cmd.pc});
    }
  }
  return out;
}

TimingChecker::TimingChecker(const TimingConfig& timing) {
  for (size_t i = 0; i < timing.rules.size(); ++i) {
    const auto& rule = timing.rules[i];
    const int64_t min_slots = rule_min_slots(rule, timing.bus_slot_ns);
    by_next_[static_cast<size_t>(rule.next)].push_back({static_cast<uint16_t>(i), rule.prev, rule.scope, min_slots});
    window_ = std::max(window_, min_slots);
  }
}

void TimingChecker::reset() {
  for (auto& h : history_) h.clear();
}

std::string violation_csv_header() { return "bus_slot,rule,bank,prev_cmd,cur_cmd,required_ns,actual_ns"; }

std::string violation_csv_line(const Violation& v, const TimingConfig& timing) {
  std::ostringstream os;
  const std::string bank = v.bank == kAllBanks ? "all" : std::to_string(v.bank);
  os << v.cur_slot << ",";
  if (v.kind == ViolationKind::Timing) {
    const auto& rule = timing.rules[v.code];
    const double actual = static_cast<double>(v.cur_slot - v.prev_slot) * timing.bus_slot_ns;
    os << rule.name << "," << bank << "," << command_class_name(v.prev_cmd) << "," << command_class_name(v.cur_cmd)
       << "," << rule.min_ns << "," << actual;
  } else {
    os << state_issue_name(static_cast<StateIssue>(v.code)) << "," << bank << "," << command_class_name(v.prev_cmd)
       << "," << command_class_name(v.cur_cmd) << ",0,0";
  }
  return os.str();
}

}  // namespace dbender
