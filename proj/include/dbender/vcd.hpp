#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "dbender/core.hpp"
#include "dbender/device.hpp"

namespace dbender {

// Value change dump of bank phases, the command bus and FIFO occupancy.
class VcdWriter {
 public:
  VcdWriter(std::ostream& out, uint32_t banks, double bus_slot_ns);

  void command(const IssuedCommand& c, const DramDevice& device);
  void fifo(int64_t slot, size_t occupancy);
  void finish(int64_t slot);

 private:
  void at(int64_t slot, bool command_follows);
  void emit_vector(uint64_t value, int width, const std::string& id);

  std::ostream& out_;
  uint32_t banks_;
  int64_t slot_ps_;
  int64_t last_time_ = -1;
  std::vector<int> phase_;
  int64_t fifo_level_ = -1;
  bool cmd_pending_ = false;
};

}  // namespace dbender
