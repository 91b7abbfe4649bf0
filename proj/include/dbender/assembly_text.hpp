#pragma once

#include <string>
#include <string_view>

#include "dbender/program.hpp"

namespace dbender {

// Text form (.dbasm):
//   label:
//   LI R5, 0                     # comment
//   ACT R5, R4 | NOP | NOP | NOP
//   READ R5, R3+ ap | NOP4       (a trailing + sets the increment flag)
// DRAM lines carry up to four commands; missing slots are NOPs.
Program parse_assembly(std::string_view text);

// Disassembly of an image without symbolic labels; parses back to the same bytes.
std::string disassemble_program(const std::vector<Instruction>& program);

}  // namespace dbender
