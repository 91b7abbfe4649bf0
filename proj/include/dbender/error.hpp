#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dbender {

enum class ErrorCode {
  InvalidRegisterField,
  ImmOverflow,
  UnknownOpcode,
  SyntaxError,
  DuplicateLabel,
  UnknownMnemonic,
  UndefinedLabel,
  InvalidRegister,
  ProgramTooLarge,
  ReadRunExceedsFifo,
  BadMagic,
  BadImage,
  ScratchpadOutOfRange,
  DecodeTrap,
  MaxCyclesExceeded,
  UnknownCounter,
  UnknownBank,
  UnknownRow,
  UnknownColumn,
  ConfigError,
  CalibrationMissing,
  FitDiverged,
  IoError,
  OutOfRange,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace dbender
