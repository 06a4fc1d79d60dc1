#pragma once

#include <stdexcept>
#include <string>

namespace nixie {

enum class Err {
  CapacityExceeded,
  UnknownChunk,
  UnknownApp,
  ChunkBusy,
  NotInFlight,
  AppTooLarge,
  InsufficientEvictable,
  InvalidScenario,
  ParseError,
  ValidationError,
  IoError,
  InvalidState,
};

const char* err_name(Err code);

// Recoverable simulation/configuration error; maps to CLI exit code 1.
class SimError : public std::runtime_error {
 public:
  SimError(Err code, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}

  Err code() const { return code_; }

 private:
  Err code_;
};

// A broken internal invariant; must be unreachable. Maps to CLI exit code 2.
class InvariantViolation : public std::logic_error {
 public:
  explicit InvariantViolation(const std::string& what)
      : std::logic_error("invariant violation: " + what) {}
};

}  // namespace nixie
