#include "dbender/platform.hpp"

namespace dbender {

Platform::Platform(PlatformConfig config)
    : config_(std::move(config)),
      device_(config_),
      core_(config_.instruction_capacity, config_.scratchpad_words),
      fifo_(config_.fifo_capacity),
      drain_(config_.drain_numerator, config_.drain_denominator),
      scheduler_(config_) {}

std::unique_ptr<Platform> Platform::initialize(const std::string& path_or_id) {
  return std::make_unique<Platform>(load_config(path_or_id));
}

AssemblyOptions Platform::assembly_options() const {
  AssemblyOptions o;
  o.capacity = config_.instruction_capacity;
  o.fifo_capacity = config_.fifo_capacity;
  o.scratchpad_words = config_.scratchpad_words;
  return o;
}

AssembledProgram Platform::assemble(const Program& program) const { return program.assemble(assembly_options()); }

Machine Platform::machine() { return Machine{device_, fifo_, drain_, &scheduler_, &trace_}; }

RunReport Platform::execute(std::span<const uint8_t> image, uint64_t max_cycles) {
  core_.load_program(image);
  Machine m = machine();
  return core_.run(m, max_cycles);
}

RunReport Platform::execute(const AssembledProgram& program, uint64_t max_cycles) {
  core_.load_program(program.instructions);
  Machine m = machine();
  return core_.run(m, max_cycles);
}

RunReport Platform::execute(const Program& program, uint64_t max_cycles) {
  return execute(assemble(program), max_cycles);
}

std::vector<Burst> Platform::receive_data(size_t n) {
  std::vector<Burst> out;
  auto& host = drain_.host();
  while (out.size() < n) {
    if (host.empty()) {
      if (fifo_.empty()) break;
      const uint64_t wait = drain_.cycles_to_next();
      if (wait == 0) {
        out.push_back(fifo_.pop());
        continue;
      }
      core_.state().cycle += wait;
      drain_.advance(fifo_, wait);
      continue;
    }
    out.push_back(host.front());
    host.pop_front();
  }
  return out;
}

}  // namespace dbender
