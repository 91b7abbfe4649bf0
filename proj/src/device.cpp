#include "dbender/device.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/math/distributions/binomial.hpp>

#include "dbender/error.hpp"

namespace dbender {

namespace {

constexpr uint64_t kMajorityTag = 0x4d414a4fULL;
constexpr size_t kWeakCacheCellLimit = size_t{48} << 20;

CommandClass class_of(DramOpcode op) {
  switch (op) {
    case DramOpcode::ACT: return CommandClass::ACT;
    case DramOpcode::PRE:
    case DramOpcode::PREA: return CommandClass::PRE;
    case DramOpcode::READ: return CommandClass::READ;
    case DramOpcode::WRITE: return CommandClass::WRITE;
    case DramOpcode::REF: return CommandClass::REF;
    case DramOpcode::ZQS: return CommandClass::ZQS;
    case DramOpcode::NOP: break;
  }
  return CommandClass::ACT;
}

const Burst kZeroBurst{};

bool near(double a, double b) { return std::fabs(a - b) < 1e-6; }

}  // namespace

DramDevice::DramDevice(const PlatformConfig& config)
    : config_(config),
      checker_(config.timing),
      banks_(config.geometry.banks),
      accumulators_(size_t{config.geometry.banks} * config.geometry.rows_per_bank, 0.0) {}

void DramDevice::check_bank(uint32_t bank) const {
  if (bank >= config_.geometry.banks) fail(ErrorCode::UnknownBank, "bank " + std::to_string(bank));
}

void DramDevice::check_row(uint32_t row) const {
  if (row >= config_.geometry.rows_per_bank) fail(ErrorCode::UnknownRow, "row " + std::to_string(row));
}

DramDevice::RowState& DramDevice::row_state(uint32_t bank, uint32_t row) {
  auto [it, inserted] = rows_.try_emplace(key(bank, row));
  if (inserted) it->second.words.assign(config_.geometry.words_per_row(), 0);
  return it->second;
}

DramDevice::RowState* DramDevice::find_row(uint32_t bank, uint32_t row) {
  auto it = rows_.find(key(bank, row));
  return it == rows_.end() ? nullptr : &it->second;
}

std::shared_ptr<const WeakCellList> DramDevice::weak_cells(uint32_t bank, uint32_t row) {
  const uint64_t k = key(bank, row);
  if (auto it = weak_cache_.find(k); it != weak_cache_.end()) return it->second;
  if (weak_cache_cells_ > kWeakCacheCellLimit) drop_fault_cache();
  auto list = generate_weak_cells(config_.fault.rowhammer.threshold, config_.geometry, config_.fault.seed, bank, row);
  weak_cache_cells_ += list->cells.size();
  weak_cache_.emplace(k, list);
  return list;
}

void DramDevice::drop_fault_cache() {
  weak_cache_.clear();
  weak_cache_cells_ = 0;
}

const Burst* DramDevice::neighbour_block(uint32_t bank, int64_t row, uint32_t transfer) {
  if (row < 0 || row >= static_cast<int64_t>(config_.geometry.rows_per_bank)) return &kZeroBurst;
  const RowState* rs = find_row(bank, static_cast<uint32_t>(row));
  if (!rs) return &kZeroBurst;
  return reinterpret_cast<const Burst*>(rs->words.data() + size_t{transfer} * 8);
}

void DramDevice::record(const Violation& v) {
  ++violation_count_;
  if (record_violations_) violations_.push_back(v);
}

void DramDevice::state_violation(StateIssue issue, CommandClass cls, uint32_t bank, int64_t slot, uint32_t pc) {
  record({ViolationKind::State, static_cast<uint16_t>(issue), cls, cls, bank, slot, slot, pc, pc});
}

void DramDevice::clear_violations() {
  violations_.clear();
  violation_count_ = 0;
}

bool DramDevice::all_banks_closed() const {
  return std::none_of(banks_.begin(), banks_.end(), [](const BankState& b) { return b.open; });
}

void DramDevice::set_self_refresh(bool on, int64_t slot) {
  now_ = std::max(now_, slot);
  self_refresh_ = on;
}

bool DramDevice::majority_timing_valid(double tras_ns, double trp_ns) const {
  const auto& m = config_.fault.majority;
  if (tras_ns > m.tras_threshold_ns + 1e-6 || trp_ns > m.trp_threshold_ns + 1e-6) return false;
  return std::any_of(m.valid_timings.begin(), m.valid_timings.end(),
                     [&](const auto& p) { return near(p.first, tras_ns) && near(p.second, trp_ns); });
}

CommandEvents DramDevice::apply_command(const DeviceCommand& cmd, int64_t slot, const Burst* write_data) {
  CommandEvents events;
  if (cmd.opcode == DramOpcode::NOP) return events;
  now_ = std::max(now_, slot);
  const bool device_wide =
      cmd.opcode == DramOpcode::PREA || cmd.opcode == DramOpcode::REF || cmd.opcode == DramOpcode::ZQS;
  const uint32_t bank = device_wide ? kAllBanks : cmd.bank;
  if (!device_wide) check_bank(bank);
  if (cmd.opcode == DramOpcode::ACT) check_row(cmd.address);
  if ((cmd.opcode == DramOpcode::READ || cmd.opcode == DramOpcode::WRITE) &&
      cmd.address >= config_.geometry.column_addresses()) {
    fail(ErrorCode::UnknownColumn, "column " + std::to_string(cmd.address));
  }
  const CommandClass cls = class_of(cmd.opcode);
  const uint64_t before = violation_count_;

  if (self_refresh_) {
    state_violation(StateIssue::CommandInSelfRefresh, cls, bank, slot, cmd.pc);
    if (cmd.opcode == DramOpcode::READ) events.has_data = true;
    events.new_violations = static_cast<uint32_t>(violation_count_ - before);
    return events;
  }

  checker_.observe({slot, cls, bank, cmd.pc}, [this](const Violation& v) { record(v); });
  ++counts_[static_cast<size_t>(cls)];

  switch (cmd.opcode) {
    case DramOpcode::ACT: {
      BankState& b = banks_[bank];
      const uint32_t row = cmd.address;
      if (b.open) state_violation(StateIssue::ActOnOpenBank, cls, bank, slot, cmd.pc);
      bool mra = false;
      if (!b.open && b.pre_after_act && b.armed_row % 4 == 1 && row == b.armed_row + 1) {
        const double tras = static_cast<double>(b.armed_pre_slot - b.armed_act_slot) * config_.timing.bus_slot_ns;
        const double trp = static_cast<double>(slot - b.armed_pre_slot) * config_.timing.bus_slot_ns;
        mra = majority_timing_valid(tras, trp);
      }
      hammer_account(bank, row);
      restore_row(bank, row, slot);
      b.open = true;
      b.open_row = row;
      b.last_act_slot = slot;
      b.last_act_row = row;
      b.pre_after_act = false;
      b.segment_overlay.reset();
      if (mra) {
        multi_row_activation(bank, row / 4);
        b.segment_overlay = row / 4;
        events.multi_row_activation = true;
      }
      break;
    }
    case DramOpcode::PRE:
    case DramOpcode::PREA: {
      auto close = [&](BankState& b) {
        b.pre_after_act = b.open;
        if (b.open) {
          b.armed_row = b.open_row;
          b.armed_act_slot = b.last_act_slot;
          b.armed_pre_slot = slot;
        }
        b.open = false;
        b.last_pre_slot = slot;
        b.segment_overlay.reset();
      };
      if (cmd.opcode == DramOpcode::PRE) close(banks_[bank]);
      else for (auto& b : banks_) close(b);
      break;
    }
    case DramOpcode::READ:
    case DramOpcode::WRITE: {
      BankState& b = banks_[bank];
      const uint32_t transfer = cmd.address >> 3;
      b.pre_after_act = false;
      if (!b.open) {
        state_violation(StateIssue::AccessClosedBank, cls, bank, slot, cmd.pc);
        if (cmd.opcode == DramOpcode::READ) events.has_data = true;
        break;
      }
      if (cmd.opcode == DramOpcode::READ) {
        events.has_data = true;
        events.data = read_block(bank, b.open_row, transfer);
      } else {
        write_block(bank, b.open_row, transfer, write_data ? *write_data : kZeroBurst);
      }
      if (cmd.flags.auto_precharge) {
        b.open = false;
        b.last_pre_slot = slot;
        b.segment_overlay.reset();
      }
      break;
    }
    case DramOpcode::REF:
      if (!all_banks_closed()) state_violation(StateIssue::RefreshWithOpenBank, cls, bank, slot, cmd.pc);
      for (auto& b : banks_) b.pre_after_act = false;
      refresh_step(slot);
      break;
    case DramOpcode::ZQS:
      if (!all_banks_closed()) state_violation(StateIssue::ZqsWithOpenBank, cls, bank, slot, cmd.pc);
      break;
    case DramOpcode::NOP: break;
  }
  events.new_violations = static_cast<uint32_t>(violation_count_ - before);
  return events;
}

void DramDevice::hammer_account(uint32_t bank, uint32_t row) {
  const auto& rh = config_.fault.rowhammer;
  if (!rh.enabled) return;
  const int64_t r = row;
  const int64_t rows = config_.geometry.rows_per_bank;
  const int64_t prev = banks_[bank].last_act_row;
  double* acc = accumulators_.data() + size_t{bank} * config_.geometry.rows_per_bank;
  for (int d : {-1, 1}) {
    const int64_t v = r + d;
    if (v < 0 || v >= rows) continue;
    acc[v] += rh.base_disturb;
    if (prev == r + 2 * d) acc[v] += rh.alternation_bonus;
  }
  const double far = rh.base_disturb * rh.distance2_ratio;
  if (far > 0) {
    for (int d : {-2, 2}) {
      const int64_t v = r + d;
      if (v >= 0 && v < rows) acc[v] += far;
    }
  }
}

void DramDevice::restore_row(uint32_t bank, uint32_t row, int64_t slot) {
  double& acc = accumulators_[key(bank, row)];
  RowState* rs = find_row(bank, row);
  if (config_.fault.retention.enabled) {
    rs = &row_state(bank, row);
    apply_retention(bank, row, *rs, slot);
  }
  if (acc >= config_.fault.rowhammer.threshold.min) {
    if (!rs) rs = &row_state(bank, row);
    if (rs->pending.empty()) rs->pending.assign(config_.geometry.columns_per_row, 0.0f);
    const auto dose = static_cast<float>(acc);
    for (float& p : rs->pending) p = std::max(p, dose);
    rs->max_pending = std::max(rs->max_pending, dose);
  }
  acc = 0.0;
  if (rs) rs->last_restore = slot;
}

void DramDevice::settle_column(uint32_t bank, uint32_t row, uint32_t transfer) {
  RowState* rs = find_row(bank, row);
  double dose = accumulators_[key(bank, row)];
  if (rs && !rs->pending.empty()) {
    dose = std::max(dose, static_cast<double>(rs->pending[transfer]));
    rs->pending[transfer] = 0.0f;
  }
  const auto& rh = config_.fault.rowhammer;
  if (dose < rh.threshold.min) return;
  const auto cells = weak_cells(bank, row);
  const uint32_t end = cells->column_begin[transfer + 1];
  const int64_t rows = config_.geometry.rows_per_bank;
  for (uint32_t i = cells->column_begin[transfer]; i < end; ++i) {
    const WeakCell& cell = cells->cells[i];
    if (static_cast<double>(cell.threshold) > dose) break;
    int64_t nbr = static_cast<int64_t>(row) + (cell.side ? 1 : -1);
    if (nbr < 0 || nbr >= rows) nbr = static_cast<int64_t>(row) - (cell.side ? 1 : -1);
    const Burst& nb = *neighbour_block(bank, nbr, transfer);
    if (rh.data_pattern_gate && gate_window(nb, cell.bit) != cell.gate) continue;
    const bool target = burst_bit(nb, cell.bit);
    const size_t word = size_t{transfer} * 8 + (cell.bit >> 6);
    const uint64_t mask = uint64_t{1} << (cell.bit & 63);
    if (!rs) {
      if (!target) continue;
      rs = &row_state(bank, row);
    }
    if (target) rs->words[word] |= mask;
    else rs->words[word] &= ~mask;
  }
}

void DramDevice::settle_row(uint32_t bank, uint32_t row) {
  RowState* rs = find_row(bank, row);
  const double acc = accumulators_[key(bank, row)];
  const double pend = rs ? rs->max_pending : 0.0;
  if (std::max(acc, pend) < config_.fault.rowhammer.threshold.min) {
    if (rs && !rs->pending.empty()) {
      rs->pending.clear();
      rs->max_pending = 0.0f;
    }
    return;
  }
  for (uint32_t c = 0; c < config_.geometry.columns_per_row; ++c) settle_column(bank, row, c);
  if ((rs = find_row(bank, row))) {
    rs->pending.clear();
    rs->max_pending = 0.0f;
  }
}

void DramDevice::settle_neighbours(uint32_t bank, uint32_t row, std::optional<uint32_t> transfer) {
  for (int64_t r : {static_cast<int64_t>(row) - 1, static_cast<int64_t>(row) + 1}) {
    if (r < 0 || r >= static_cast<int64_t>(config_.geometry.rows_per_bank)) continue;
    if (transfer) settle_column(bank, static_cast<uint32_t>(r), *transfer);
    else settle_row(bank, static_cast<uint32_t>(r));
  }
}

void DramDevice::apply_retention(uint32_t bank, uint32_t row, RowState& rs, int64_t slot) {
  const auto& rt = config_.fault.retention;
  const double elapsed_ms = static_cast<double>(slot - rs.last_restore) * config_.timing.bus_slot_ns * 1e-6;
  if (elapsed_ms <= 0) return;
  for (const auto& cell : generate_retention_cells(rt, config_.geometry, config_.fault.seed, bank, row)) {
    if (cell.t_ret_ms >= elapsed_ms) continue;
    const uint64_t mask = uint64_t{1} << (cell.position & 63);
    if (cell.anti) rs.words[cell.position >> 6] |= mask;
    else rs.words[cell.position >> 6] &= ~mask;
  }
}

void DramDevice::write_block(uint32_t bank, uint32_t row, uint32_t transfer, const Burst& data) {
  settle_neighbours(bank, row, transfer);
  RowState& rs = row_state(bank, row);
  std::copy(data.begin(), data.end(), rs.words.begin() + size_t{transfer} * 8);
  if (!rs.pending.empty()) rs.pending[transfer] = 0.0f;
}

Burst DramDevice::read_block(uint32_t bank, uint32_t row, uint32_t transfer) {
  settle_column(bank, row, transfer);
  RowState* rs = find_row(bank, row);
  if (rs && config_.fault.retention.enabled) apply_retention(bank, row, *rs, now_);
  Burst out{};
  if (rs) std::copy_n(rs->words.begin() + size_t{transfer} * 8, 8, out.begin());
  return out;
}

void DramDevice::refresh_step(int64_t slot) {
  const uint32_t rows = config_.geometry.rows_per_bank;
  for (uint32_t i = 0; i < config_.rows_per_ref; ++i) {
    const uint32_t row = (refresh_pointer_ + i) % rows;
    for (uint32_t b = 0; b < config_.geometry.banks; ++b) restore_row(b, row, slot);
  }
  refresh_pointer_ = (refresh_pointer_ + config_.rows_per_ref) % rows;
}

void DramDevice::host_write_block(uint32_t bank, uint32_t row, uint32_t transfer, const Burst& data) {
  check_bank(bank);
  check_row(row);
  if (transfer >= config_.geometry.columns_per_row) fail(ErrorCode::UnknownColumn, "transfer " + std::to_string(transfer));
  restore_row(bank, row, now_);
  write_block(bank, row, transfer, data);
}

void DramDevice::host_fill_row(uint32_t bank, uint32_t row, const Burst& pattern) {
  check_bank(bank);
  check_row(row);
  settle_neighbours(bank, row, std::nullopt);
  RowState& rs = row_state(bank, row);
  for (size_t w = 0; w < rs.words.size(); ++w) rs.words[w] = pattern[w & 7];
  rs.pending.clear();
  rs.max_pending = 0.0f;
  rs.last_restore = now_;
  accumulators_[key(bank, row)] = 0.0;
}

void DramDevice::host_write_row(uint32_t bank, uint32_t row, const std::vector<uint64_t>& words) {
  if (words.size() != config_.geometry.words_per_row()) {
    fail(ErrorCode::ConfigError, "row data has " + std::to_string(words.size()) + " words");
  }
  host_fill_row(bank, row, Burst{});
  row_state(bank, row).words = words;
}

Burst DramDevice::host_read_block(uint32_t bank, uint32_t row, uint32_t transfer) {
  check_bank(bank);
  check_row(row);
  if (transfer >= config_.geometry.columns_per_row) fail(ErrorCode::UnknownColumn, "transfer " + std::to_string(transfer));
  return read_block(bank, row, transfer);
}

std::vector<uint64_t> DramDevice::host_read_row(uint32_t bank, uint32_t row) {
  check_bank(bank);
  check_row(row);
  settle_row(bank, row);
  RowState* rs = find_row(bank, row);
  if (rs && config_.fault.retention.enabled) apply_retention(bank, row, *rs, now_);
  if (!rs) return std::vector<uint64_t>(config_.geometry.words_per_row(), 0);
  return rs->words;
}

double DramDevice::accumulator(uint32_t bank, uint32_t row) const {
  check_bank(bank);
  check_row(row);
  return accumulators_[key(bank, row)];
}

void DramDevice::add_disturbance(uint32_t bank, uint32_t row, double amount) {
  check_bank(bank);
  check_row(row);
  accumulators_[key(bank, row)] += amount;
}

uint32_t DramDevice::visible_flips_at(uint32_t bank, uint32_t row, double dose) {
  check_bank(bank);
  check_row(row);
  settle_row(bank, row);
  if (dose < config_.fault.rowhammer.threshold.min) return 0;
  const auto cells = weak_cells(bank, row);
  const auto& rh = config_.fault.rowhammer;
  const int64_t rows = config_.geometry.rows_per_bank;
  const RowState* rs = find_row(bank, row);
  uint32_t count = 0;
  for (const WeakCell& cell : cells->cells) {
    if (static_cast<double>(cell.threshold) > dose) continue;
    int64_t nbr = static_cast<int64_t>(row) + (cell.side ? 1 : -1);
    if (nbr < 0 || nbr >= rows) nbr = static_cast<int64_t>(row) - (cell.side ? 1 : -1);
    const Burst& nb = *neighbour_block(bank, nbr, cell.column);
    if (rh.data_pattern_gate && gate_window(nb, cell.bit) != cell.gate) continue;
    const size_t word = size_t{cell.column} * 8 + (cell.bit >> 6);
    const bool current = rs && ((rs->words[word] >> (cell.bit & 63)) & 1);
    if (burst_bit(nb, cell.bit) != current) ++count;
  }
  return count;
}

double DramDevice::flip_onset(uint32_t bank, uint32_t row) {
  check_bank(bank);
  check_row(row);
  settle_row(bank, row);
  const auto cells = weak_cells(bank, row);
  const auto& rh = config_.fault.rowhammer;
  const int64_t rows = config_.geometry.rows_per_bank;
  const RowState* rs = find_row(bank, row);
  double best = std::numeric_limits<double>::infinity();
  for (const WeakCell& cell : cells->cells) {
    if (static_cast<double>(cell.threshold) >= best) continue;
    int64_t nbr = static_cast<int64_t>(row) + (cell.side ? 1 : -1);
    if (nbr < 0 || nbr >= rows) nbr = static_cast<int64_t>(row) - (cell.side ? 1 : -1);
    const Burst& nb = *neighbour_block(bank, nbr, cell.column);
    if (rh.data_pattern_gate && gate_window(nb, cell.bit) != cell.gate) continue;
    const size_t word = size_t{cell.column} * 8 + (cell.bit >> 6);
    const bool current = rs && ((rs->words[word] >> (cell.bit & 63)) & 1);
    if (burst_bit(nb, cell.bit) != current) best = cell.threshold;
  }
  return best;
}

SegmentErrorRates DramDevice::segment_rates(uint32_t bank, uint32_t segment) const {
  return segment_error_rates(config_.fault.majority, config_.fault.seed, bank, segment);
}

void DramDevice::host_reset_row(uint32_t bank, uint32_t row) {
  check_bank(bank);
  check_row(row);
  rows_.erase(key(bank, row));
  accumulators_[key(bank, row)] = 0.0;
}

void DramDevice::multi_row_activation(uint32_t bank, uint32_t segment) {
  check_bank(bank);
  const uint32_t r0 = segment * 4;
  check_row(r0 + 2);
  if (r0 > 0) settle_row(bank, r0 - 1);
  if (r0 + 3 < config_.geometry.rows_per_bank) settle_row(bank, r0 + 3);
  for (uint32_t i = 0; i < 3; ++i) settle_row(bank, r0 + i);

  const size_t words = config_.geometry.words_per_row();
  RowState& a = row_state(bank, r0);
  RowState& b = row_state(bank, r0 + 1);
  RowState& c = row_state(bank, r0 + 2);
  const bool row0_zero = std::all_of(a.words.begin(), a.words.end(), [](uint64_t w) { return w == 0; });
  const bool row1_ones = std::all_of(b.words.begin(), b.words.end(), [](uint64_t w) { return w == ~uint64_t{0}; });
  std::vector<uint64_t> v(words);
  for (size_t w = 0; w < words; ++w) v[w] = (a.words[w] & b.words[w]) | (a.words[w] & c.words[w]) | (b.words[w] & c.words[w]);

  const SegmentErrorRates rates = segment_rates(bank, segment);
  const double eps = row0_zero ? rates.and_rate : row1_ones ? rates.or_rate : std::max(rates.and_rate, rates.or_rate);
  if (eps > 0) {
    std::mt19937_64 rng(hash_combine({config_.fault.seed, kMajorityTag, bank, segment, mra_count_}));
    const uint32_t bits = config_.geometry.bits_per_row();
    // Error count by inverse CDF of one uniform, so it is monotone in eps; then distinct positions.
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double q = boost::math::quantile(boost::math::binomial(bits, eps), u(rng));
    const auto errors = static_cast<uint32_t>(std::min<double>(q, bits));
    // Above half the bitlines, place the correct ones instead.
    const bool invert = errors * 2 > bits;
    const uint32_t marks = invert ? bits - errors : errors;
    std::vector<uint64_t> hit(words, 0);
    uint32_t placed = 0;
    while (placed < marks) {
      const auto p = static_cast<uint32_t>(((rng() >> 32) * bits) >> 32);
      const uint64_t mask = uint64_t{1} << (p & 63);
      if (hit[p >> 6] & mask) continue;
      hit[p >> 6] |= mask;
      ++placed;
    }
    for (size_t w = 0; w < words; ++w) v[w] ^= invert ? ~hit[w] : hit[w];
  }
  for (RowState* rs : {&a, &b, &c}) {
    rs->words = v;
    rs->pending.clear();
    rs->max_pending = 0.0f;
    rs->last_restore = now_;
  }
  for (uint32_t i = 0; i < 3; ++i) accumulators_[key(bank, r0 + i)] = 0.0;
  ++mra_count_;
}

BankPhase DramDevice::bank_phase(uint32_t bank, int64_t slot) const {
  const BankState& b = banks_.at(bank);
  auto slots = [&](const char* name) -> int64_t {
    auto it = config_.timing.parameters.find(name);
    return it == config_.timing.parameters.end() ? 0 : config_.timing.to_slots(it->second);
  };
  if (b.open) return slot < b.last_act_slot + slots("tRCD") ? BankPhase::Activating : BankPhase::Active;
  return slot < b.last_pre_slot + slots("tRP") ? BankPhase::Precharging : BankPhase::Precharged;
}

EnergyReport DramDevice::energy_report() const {
  EnergyReport r;
  for (int i = 0; i < kCommandClassCount; ++i) {
    r.per_class[i] = static_cast<double>(counts_[i]) * config_.energy[i];
    r.total += r.per_class[i];
  }
  return r;
}

}  // namespace dbender
