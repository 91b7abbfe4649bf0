#include "dbender/error.hpp"

namespace dbender {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidRegisterField: return "InvalidRegisterField";
    case ErrorCode::ImmOverflow: return "ImmOverflow";
    case ErrorCode::UnknownOpcode: return "UnknownOpcode";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::UnknownMnemonic: return "UnknownMnemonic";
    case ErrorCode::UndefinedLabel: return "UndefinedLabel";
    case ErrorCode::InvalidRegister: return "InvalidRegister";
    case ErrorCode::ProgramTooLarge: return "ProgramTooLarge";
    case ErrorCode::ReadRunExceedsFifo: return "ReadRunExceedsFifo";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadImage: return "BadImage";
    case ErrorCode::ScratchpadOutOfRange: return "ScratchpadOutOfRange";
    case ErrorCode::DecodeTrap: return "DecodeTrap";
    case ErrorCode::MaxCyclesExceeded: return "MaxCyclesExceeded";
    case ErrorCode::UnknownCounter: return "UnknownCounter";
    case ErrorCode::UnknownBank: return "UnknownBank";
    case ErrorCode::UnknownRow: return "UnknownRow";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::CalibrationMissing: return "CalibrationMissing";
    case ErrorCode::FitDiverged: return "FitDiverged";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::OutOfRange: return "OutOfRange";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace dbender
