#include "dbender/fifo.hpp"

#include <algorithm>

#include "dbender/error.hpp"

namespace dbender {

bool ReadbackFifo::push(const Burst& data) {
  if (queue_.size() >= capacity_) {
    ++overflows_;
    return false;
  }
  queue_.push_back(data);
  high_water_ = std::max(high_water_, queue_.size());
  return true;
}

Burst ReadbackFifo::pop() {
  Burst b = queue_.front();
  queue_.pop_front();
  return b;
}

void ReadbackFifo::clear() {
  queue_.clear();
  high_water_ = 0;
  overflows_ = 0;
}

HostDrain::HostDrain(uint32_t numerator, uint32_t denominator) { set_rate(numerator, denominator); }

void HostDrain::set_rate(uint32_t numerator, uint32_t denominator) {
  if (denominator == 0) fail(ErrorCode::ConfigError, "drain denominator must be positive");
  num_ = numerator;
  den_ = denominator;
  credit_ = 0;
}

void HostDrain::advance(ReadbackFifo& fifo, uint64_t cycles) {
  if (cycles == 0 || num_ == 0) return;
  const uint64_t total = credit_ + cycles * num_;
  const uint64_t moves = total / den_;
  credit_ = total % den_;
  const uint64_t n = std::min<uint64_t>(moves, fifo.size());
  for (uint64_t i = 0; i < n; ++i) host_.push_back(fifo.pop());
  drained_ += n;
}

uint64_t HostDrain::cycles_to_next() const {
  if (num_ == 0) return 0;
  const uint64_t need = den_ > credit_ ? den_ - credit_ : 0;
  return std::max<uint64_t>(1, (need + num_ - 1) / num_);
}

void HostDrain::reset() {
  credit_ = 0;
  host_.clear();
  drained_ = 0;
}

}  // namespace dbender
