#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <vector>

#include "dbender/fault_model.hpp"

namespace dbender {

class ReadbackFifo {
 public:
  explicit ReadbackFifo(size_t capacity = 512) : capacity_(capacity) {}

  size_t capacity() const { return capacity_; }
  size_t size() const { return queue_.size(); }
  size_t free() const { return capacity_ - queue_.size(); }
  bool empty() const { return queue_.empty(); }
  size_t high_water() const { return high_water_; }
  uint64_t overflows() const { return overflows_; }

  // False (and the transfer is dropped) when full.
  bool push(const Burst& data);
  Burst pop();
  // Proceed iff free space covers the announced READ count.
  bool admits(uint32_t reads) const { return free() >= reads; }
  void clear();

 private:
  size_t capacity_;
  std::deque<Burst> queue_;
  size_t high_water_ = 0;
  uint64_t overflows_ = 0;
};

// Host link draining num/den transfers per core cycle. Credit that finds the
// FIFO empty is lost.
class HostDrain {
 public:
  HostDrain(uint32_t numerator = 1, uint32_t denominator = 4);

  void set_rate(uint32_t numerator, uint32_t denominator);
  uint32_t numerator() const { return num_; }
  uint32_t denominator() const { return den_; }

  // Advances `cycles` core cycles, moving transfers into the host buffer.
  void advance(ReadbackFifo& fifo, uint64_t cycles);
  // Cycles until the next transfer leaves the FIFO (0 if the rate is zero).
  uint64_t cycles_to_next() const;

  std::deque<Burst>& host() { return host_; }
  const std::deque<Burst>& host() const { return host_; }
  uint64_t drained() const { return drained_; }
  void reset();

 private:
  uint32_t num_;
  uint32_t den_;
  uint64_t credit_ = 0;
  std::deque<Burst> host_;
  uint64_t drained_ = 0;
};

}  // namespace dbender
