#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "dbender/isa.hpp"

namespace dbender {

struct PreexecResult {
  bool completed = false;
  uint64_t steps = 0;
  // HINT address -> largest number of READs issued before the next HINT or END.
  std::map<uint32_t, uint32_t> hint_reads;
  uint64_t total_reads = 0;
};

// Functional (untimed) execution used to size READ hints. Traps end the run early.
PreexecResult preexecute(const std::vector<Instruction>& program, uint64_t step_limit, size_t scratchpad_words);

}  // namespace dbender
