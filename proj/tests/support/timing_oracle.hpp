#pragma once

// O(n^2) reference for the timing checker. Scope and distance rules are
// written out here independently of src/timing.cpp.

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

#include "dbender/timing.hpp"

namespace dbender::testkit {

inline bool oracle_scope(RuleScope scope, uint32_t a, uint32_t b) {
  switch (scope) {
    case RuleScope::SameDevice: return true;
    case RuleScope::SameBank: return a == kAllBanks || b == kAllBanks || a == b;
    case RuleScope::DifferentBank: return a != kAllBanks && b != kAllBanks && a != b;
  }
  return false;
}

inline int64_t oracle_min_slots(double ns, double slot_ns) {
  // Smallest slot distance whose duration covers ns.
  int64_t k = 0;
  while (static_cast<double>(k) * slot_ns + 1e-9 < ns) ++k;
  return k;
}

inline std::vector<Violation> all_pairs_violations(const std::vector<TimedCommand>& trace, const TimingConfig& t) {
  std::vector<Violation> out;
  for (size_t j = 0; j < trace.size(); ++j) {
    for (size_t i = 0; i < j; ++i) {
      for (size_t k = 0; k < t.rules.size(); ++k) {
        const TimingRule& r = t.rules[k];
        if (r.prev != trace[i].cls || r.next != trace[j].cls) continue;
        if (!oracle_scope(r.scope, trace[i].bank, trace[j].bank)) continue;
        if (trace[j].slot - trace[i].slot >= oracle_min_slots(r.min_ns, t.bus_slot_ns)) continue;
        out.push_back(Violation{ViolationKind::Timing, static_cast<uint16_t>(k), r.prev, r.next, trace[j].bank,
                                trace[i].slot, trace[j].slot, trace[i].pc, trace[j].pc});
      }
    }
  }
  return out;
}

inline auto violation_key(const Violation& v) {
  return std::make_tuple(v.cur_slot, v.prev_slot, v.code, v.bank, v.prev_pc, v.cur_pc, static_cast<int>(v.prev_cmd),
                         static_cast<int>(v.cur_cmd), static_cast<int>(v.kind));
}

inline std::vector<Violation> sorted(std::vector<Violation> v) {
  std::sort(v.begin(), v.end(), [](const Violation& a, const Violation& b) { return violation_key(a) < violation_key(b); });
  return v;
}

}  // namespace dbender::testkit
