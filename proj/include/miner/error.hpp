#pragma once

#include <stdexcept>
#include <string>

namespace miner {

enum class ErrorCode {
  NonDivisibleDims,
  WrongKind,
  WrongDomain,
  IndexOutOfRange,
  StaleActivations,
  ShapeMismatch,
  DimMismatch,
  ScaleOutOfRange,
  OutOfDomain,
  InvalidConfig,
  InvalidSignal,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  ChecksumMismatch,
  CorruptFile,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

/// Exception type thrown by every module in the library. The code lets
/// callers (and the CLI exit-code mapping) branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace miner
