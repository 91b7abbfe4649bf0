#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dbender/config.hpp"
#include "dbender/core.hpp"
#include "dbender/device.hpp"
#include "dbender/fifo.hpp"
#include "dbender/program.hpp"
#include "dbender/scheduler.hpp"

namespace dbender {

inline constexpr uint64_t kDefaultMaxCycles = uint64_t{1} << 40;

// One simulated board: instruction memory and core, DRAM device, readback
// FIFO with its host link, and the periodic operation scheduler.
class Platform {
 public:
  explicit Platform(PlatformConfig config);
  // Loads a profile by path or id.
  static std::unique_ptr<Platform> initialize(const std::string& path_or_id);

  const PlatformConfig& config() const { return config_; }
  AssemblyOptions assembly_options() const;
  AssembledProgram assemble(const Program& program) const;

  RunReport execute(std::span<const uint8_t> image, uint64_t max_cycles = kDefaultMaxCycles);
  RunReport execute(const AssembledProgram& program, uint64_t max_cycles = kDefaultMaxCycles);
  RunReport execute(const Program& program, uint64_t max_cycles = kDefaultMaxCycles);

  // Up to n transfers in FIFO order. Waits for the host link when the host
  // buffer runs dry, which advances simulated time.
  std::vector<Burst> receive_data(size_t n);

  void set_refresh(bool on) { scheduler_.set_enabled(PeriodicOp::Refresh, on); }
  void set_trace(TraceSink sink) { trace_ = std::move(sink); }

  DramDevice& device() { return device_; }
  Core& core() { return core_; }
  ReadbackFifo& fifo() { return fifo_; }
  HostDrain& drain() { return drain_; }
  PeriodicScheduler& scheduler() { return scheduler_; }
  Machine machine();

 private:
  PlatformConfig config_;
  DramDevice device_;
  Core core_;
  ReadbackFifo fifo_;
  HostDrain drain_;
  PeriodicScheduler scheduler_;
  TraceSink trace_;
};

}  // namespace dbender
