#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace aimcsim {

/// Cycle count. 64-bit so event times of 1e9+ cycles are representable.
using Cycle = std::uint64_t;

/// Phases recorded on the timeline. The string labels are frozen: they are
/// part of the JSON-lines trace format.
enum class Phase : std::uint8_t {
  StreamIn,
  Eval,
  StreamOut,
  DmaRead,
  DmaWrite,
  WaitEvent,
  Prog,
  ConflictStall,
  Idle,
};

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::StreamIn: return "stream-in";
    case Phase::Eval: return "eval";
    case Phase::StreamOut: return "stream-out";
    case Phase::DmaRead: return "dma-read";
    case Phase::DmaWrite: return "dma-write";
    case Phase::WaitEvent: return "wait-event";
    case Phase::Prog: return "prog";
    case Phase::ConflictStall: return "conflict-stall";
    case Phase::Idle: return "idle";
  }
  return "?";
}

/// Raised by the simulation kernel and the component models.
struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised by configuration parsing and validation.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
constexpr T ceil_div(T a, T b) {
  return (a + b - 1) / b;
}

}  // namespace aimcsim
