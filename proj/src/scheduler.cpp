#include "dbender/scheduler.hpp"

#include <algorithm>
#include <climits>

#include "dbender/error.hpp"

namespace dbender {

std::string_view periodic_op_name(PeriodicOp op) {
  switch (op) {
    case PeriodicOp::Refresh: return "refresh";
    case PeriodicOp::Zqs: return "zqs";
    case PeriodicOp::PeriodicRead: return "periodic_read";
  }
  return "?";
}

namespace {

DeviceCommand canned(DramOpcode op, uint32_t bank = 0, uint32_t address = 0) {
  DeviceCommand c;
  c.opcode = op;
  c.bank = bank;
  c.address = address;
  c.pc = kAllBanks;
  return c;
}

int64_t param_slots(const TimingConfig& t, const char* name) {
  auto it = t.parameters.find(name);
  return it == t.parameters.end() ? 1 : std::max<int64_t>(1, t.to_slots(it->second));
}

}  // namespace

PeriodicScheduler::PeriodicScheduler(const PlatformConfig& config) {
  const TimingConfig& t = config.timing;
  const int64_t trp = param_slots(t, "tRP");
  const int64_t trfc = param_slots(t, "tRFC");
  const int64_t trcd = param_slots(t, "tRCD");
  const int64_t tras = param_slots(t, "tRAS");
  const int64_t trtp = param_slots(t, "tRTP");

  Entry& ref = entries_[index(PeriodicOp::Refresh)];
  ref.enabled = config.scheduler.refresh_enabled;
  ref.period = std::max<int64_t>(1, t.to_slots(config.scheduler.refresh_period_ns));
  ref.program = {{canned(DramOpcode::PREA, kAllBanks), 0}, {canned(DramOpcode::REF, kAllBanks), trp}};
  ref.span = trp + trfc;

  Entry& zq = entries_[index(PeriodicOp::Zqs)];
  zq.enabled = config.scheduler.zqs_enabled;
  zq.period = std::max<int64_t>(1, t.to_slots(config.scheduler.zqs_period_ns));
  zq.program = {{canned(DramOpcode::ZQS, kAllBanks), 0}};
  zq.span = 1;

  Entry& rd = entries_[index(PeriodicOp::PeriodicRead)];
  rd.enabled = config.scheduler.periodic_read_enabled;
  rd.period = std::max<int64_t>(1, t.to_slots(config.scheduler.periodic_read_period_ns));
  const int64_t act = trp;
  const int64_t read = act + trcd;
  const int64_t pre = std::max(act + tras, read + trtp);
  rd.program = {{canned(DramOpcode::PREA, kAllBanks), 0},
                {canned(DramOpcode::ACT, 0, 0), act},
                {canned(DramOpcode::READ, 0, 0), read},
                {canned(DramOpcode::PRE, 0), pre}};
  rd.span = pre + trp;
  // Periodic work has to fit in the time between deadlines or injections never catch up.
  double load = 0.0;
  for (const Entry& e : entries_) load += static_cast<double>(e.span) / static_cast<double>(e.period);
  if (load >= 1.0) fail(ErrorCode::ConfigError, "periodic operations need more bus time than their periods allow");
  reset();
}

void PeriodicScheduler::set_enabled(PeriodicOp op, bool on) { entries_[index(op)].enabled = on; }

std::optional<PeriodicOp> PeriodicScheduler::due(int64_t slot) const {
  for (int i = 0; i < kPeriodicOpCount; ++i) {
    const Entry& e = entries_[i];
    if (e.enabled && e.next <= slot) return static_cast<PeriodicOp>(i);
  }
  return std::nullopt;
}

int64_t PeriodicScheduler::next_due() const {
  int64_t best = INT64_MAX;
  for (const Entry& e : entries_) {
    if (e.enabled) best = std::min(best, e.next);
  }
  return best;
}

void PeriodicScheduler::complete(PeriodicOp op) { entries_[index(op)].next += entries_[index(op)].period; }

void PeriodicScheduler::skip_until(int64_t slot) {
  for (Entry& e : entries_) {
    if (e.period > 0 && e.next <= slot) e.next += ((slot - e.next) / e.period + 1) * e.period;
  }
}

void PeriodicScheduler::reset() {
  for (Entry& e : entries_) e.next = e.period;
}

}  // namespace dbender
