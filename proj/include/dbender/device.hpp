#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "dbender/config.hpp"
#include "dbender/fault_model.hpp"
#include "dbender/isa.hpp"
#include "dbender/timing.hpp"

namespace dbender {

// A command after register resolution. address is the row for ACT and the
// column address (0 .. 8 * columns_per_row - 1) for READ/WRITE.
struct DeviceCommand {
  DramOpcode opcode = DramOpcode::NOP;
  uint32_t bank = 0;
  uint32_t address = 0;
  CommandFlags flags;
  uint32_t pc = 0;
};

struct CommandEvents {
  uint32_t new_violations = 0;
  bool has_data = false;
  Burst data{};
  bool multi_row_activation = false;
};

enum class BankPhase : uint8_t { Precharged, Activating, Active, Precharging };

struct BankState {
  bool open = false;
  uint32_t open_row = 0;
  int64_t last_act_slot = INT64_MIN / 2;
  int64_t last_pre_slot = INT64_MIN / 2;
  // Row of the most recent ACT, for the alternation bonus.
  int64_t last_act_row = -1;
  // ACT -> PRE seen; a following ACT may complete a multi-row activation.
  bool pre_after_act = false;
  uint32_t armed_row = 0;
  int64_t armed_act_slot = 0;
  int64_t armed_pre_slot = 0;
  std::optional<uint32_t> segment_overlay;
};

struct EnergyReport {
  std::array<double, kCommandClassCount> per_class{};
  double total = 0.0;
};

class DramDevice {
 public:
  explicit DramDevice(const PlatformConfig& config);

  const PlatformConfig& config() const { return config_; }
  const Geometry& geometry() const { return config_.geometry; }
  const TimingConfig& timing() const { return config_.timing; }

  // slot must be non-decreasing across calls. write_data feeds WRITE.
  CommandEvents apply_command(const DeviceCommand& cmd, int64_t slot, const Burst* write_data = nullptr);

  // Self-refresh mode (SRE/SRX).
  void set_self_refresh(bool on, int64_t slot);
  bool self_refresh() const { return self_refresh_; }

  // Host-side access outside the timed command stream, used for fixture setup
  // and readback. A host write restores the row like the ACT of an init program.
  void host_write_block(uint32_t bank, uint32_t row, uint32_t transfer, const Burst& data);
  void host_fill_row(uint32_t bank, uint32_t row, const Burst& pattern);
  void host_write_row(uint32_t bank, uint32_t row, const std::vector<uint64_t>& words);
  Burst host_read_block(uint32_t bank, uint32_t row, uint32_t transfer);
  std::vector<uint64_t> host_read_row(uint32_t bank, uint32_t row);
  // Returns a row to its power-on state (zero data, no dose) and frees its storage.
  void host_reset_row(uint32_t bank, uint32_t row);

  double accumulator(uint32_t bank, uint32_t row) const;
  // Adds RowHammer dose to a row as if neighbouring activations had produced it.
  void add_disturbance(uint32_t bank, uint32_t row, double amount);
  // Smallest dose at which the row shows a visible flip given current data; +inf if none.
  double flip_onset(uint32_t bank, uint32_t row);
  // Number of cells whose flip would be visible at `dose`, given current data.
  uint32_t visible_flips_at(uint32_t bank, uint32_t row, double dose);

  void multi_row_activation(uint32_t bank, uint32_t segment);
  SegmentErrorRates segment_rates(uint32_t bank, uint32_t segment) const;
  bool majority_timing_valid(double tras_ns, double trp_ns) const;

  const BankState& bank_state(uint32_t bank) const { return banks_.at(bank); }
  BankPhase bank_phase(uint32_t bank, int64_t slot) const;

  const std::vector<Violation>& violations() const { return violations_; }
  uint64_t violation_count() const { return violation_count_; }
  void set_record_violations(bool on) { record_violations_ = on; }
  void clear_violations();

  const std::array<uint64_t, kCommandClassCount>& command_counts() const { return counts_; }
  EnergyReport energy_report() const;
  uint64_t multi_row_activations() const { return mra_count_; }
  int64_t now() const { return now_; }

  // Frees cached weak-cell lists (memory only; results are unaffected).
  void drop_fault_cache();

 private:
  struct RowState {
    std::vector<uint64_t> words;
    // Dose not yet applied per column, carried across restores.
    std::vector<float> pending;
    float max_pending = 0.0f;
    int64_t last_restore = 0;
  };

  uint64_t key(uint32_t bank, uint32_t row) const { return uint64_t{bank} * config_.geometry.rows_per_bank + row; }
  void check_bank(uint32_t bank) const;
  void check_row(uint32_t row) const;
  RowState& row_state(uint32_t bank, uint32_t row);
  RowState* find_row(uint32_t bank, uint32_t row);
  std::shared_ptr<const WeakCellList> weak_cells(uint32_t bank, uint32_t row);
  const Burst* neighbour_block(uint32_t bank, int64_t row, uint32_t transfer);

  void record(const Violation& v);
  void state_violation(StateIssue issue, CommandClass cls, uint32_t bank, int64_t slot, uint32_t pc);
  void hammer_account(uint32_t bank, uint32_t row);
  void restore_row(uint32_t bank, uint32_t row, int64_t slot);
  void settle_column(uint32_t bank, uint32_t row, uint32_t transfer);
  void settle_row(uint32_t bank, uint32_t row);
  void settle_neighbours(uint32_t bank, uint32_t row, std::optional<uint32_t> transfer);
  void apply_retention(uint32_t bank, uint32_t row, RowState& rs, int64_t slot);
  void write_block(uint32_t bank, uint32_t row, uint32_t transfer, const Burst& data);
  Burst read_block(uint32_t bank, uint32_t row, uint32_t transfer);
  void refresh_step(int64_t slot);
  bool all_banks_closed() const;

  PlatformConfig config_;
  TimingChecker checker_;
  std::vector<BankState> banks_;
  std::vector<double> accumulators_;
  std::unordered_map<uint64_t, RowState> rows_;
  std::unordered_map<uint64_t, std::shared_ptr<const WeakCellList>> weak_cache_;
  size_t weak_cache_cells_ = 0;
  std::vector<Violation> violations_;
  uint64_t violation_count_ = 0;
  bool record_violations_ = true;
  std::array<uint64_t, kCommandClassCount> counts_{};
  bool self_refresh_ = false;
  uint32_t refresh_pointer_ = 0;
  uint64_t mra_count_ = 0;
  int64_t now_ = 0;
};

}  // namespace dbender
