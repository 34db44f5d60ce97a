#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "aimcsim/types.hpp"

namespace aimcsim {

enum class LinkKind : std::uint8_t { wired, wireless };
enum class LinkAccounting : std::uint8_t { aggregate_shared, per_direction };

inline const char* to_string(LinkKind k) {
  return k == LinkKind::wired ? "wired" : "wireless";
}
inline const char* to_string(LinkAccounting a) {
  return a == LinkAccounting::aggregate_shared ? "aggregate_shared" : "per_direction";
}

/// Crossbar accelerator geometry and timing. Defaults are the evaluated
/// 256x256 array with 16 4-byte L1 ports and 130 ns of analog evaluation.
struct ImaConfig {
  std::uint32_t rows = 256;              // wordlines: max input channels per job
  std::uint32_t cols = 256;              // bitlines: max output channels per job
  std::uint32_t ports = 16;              // L1 ports
  std::uint32_t port_width_bytes = 4;    // bytes per port per cycle
  double t_eval_ns = 130.0;              // analog evaluation time
  std::uint32_t input_bits = 8;
  std::uint32_t weight_bits = 4;

  std::uint32_t stream_beat_bytes() const { return ports * port_width_bytes; }
  bool operator==(const ImaConfig&) const = default;
};

struct ClusterConfig {
  std::uint32_t n_cores = 8;
  std::uint64_t l1_bytes = 65536;
  std::uint32_t l1_banks = 16;
  std::uint32_t dma_channels = 2;
  ImaConfig ima;
  Cycle prog_overhead_cycles = 150;     // cycles to load a new accelerator context
  Cycle event_latency_cycles = 2;       // event-unit delivery latency
  Cycle tile_overhead_cycles = 40;      // per-tile software scheduling cost
  std::uint64_t runtime_reserve_bytes = 8192;  // L1 held back for stacks/descriptors
  bool operator==(const ClusterConfig&) const = default;
};

struct InterconnectConfig {
  LinkKind kind = LinkKind::wired;
  std::uint64_t bandwidth_bits_per_cycle = 256;
  Cycle latency_cycles = 9;
  bool broadcast_enabled = false;
  LinkAccounting accounting = LinkAccounting::aggregate_shared;
  bool operator==(const InterconnectConfig&) const = default;
};

struct L2Config {
  std::uint32_t banks = 16;
  std::uint32_t bank_word_bytes = 8;
  std::uint64_t capacity_bytes = 16ull * 1024 * 1024;
  bool operator==(const L2Config&) const = default;
};

struct ArchConfig {
  double f_clock = 0.0;          // Hz
  std::uint32_t n_clusters = 0;
  ClusterConfig cluster;
  InterconnectConfig interconnect;
  L2Config l2;
  bool operator==(const ArchConfig&) const = default;
};

/// Converts a bandwidth in Gbit/s into bits per clock cycle.
/// 22.4 Gbit/s at 350 MHz is exactly 64 bit/cycle.
inline double bits_per_cycle(double bandwidth_gbit_s, double f_clock_hz) {
  if (bandwidth_gbit_s <= 0.0 || f_clock_hz <= 0.0) {
    throw ConfigError("bits_per_cycle requires positive arguments");
  }
  return bandwidth_gbit_s * 1e9 / f_clock_hz;
}

/// Integer cycle count for a duration in ns, rounded up. The small epsilon
/// keeps exact products (e.g. 35.0) from rounding to 36 under float noise.
inline Cycle cycles_from_ns(double ns, double f_clock_hz) {
  double cycles = ns * f_clock_hz * 1e-9;
  return static_cast<Cycle>(std::ceil(cycles - 1e-9));
}

inline bool is_power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

/// Checks every structural invariant and returns the complete list of
/// violations (empty when the configuration is valid).
inline std::vector<std::string> validate(const ArchConfig& cfg) {
  std::vector<std::string> v;
  auto bad = [&v](std::string msg) { v.push_back(std::move(msg)); };

  if (!(cfg.f_clock > 0.0)) bad("f_clock must be > 0");
  if (cfg.n_clusters < 1) bad("n_clusters must be >= 1");
  if (cfg.n_clusters > 64) bad("n_clusters must be <= 64");

  const ClusterConfig& cl = cfg.cluster;
  if (cl.n_cores < 1) bad("n_cores must be >= 1");
  if (cl.l1_bytes == 0) bad("l1_bytes must be > 0");
  if (!is_power_of_two(cl.l1_banks)) bad("l1_banks must be a power of two");
  else if (cl.l1_bytes % cl.l1_banks != 0) bad("l1_bytes must be divisible by l1_banks");
  if (cl.dma_channels < 1) bad("dma_channels must be >= 1");
  if (cl.event_latency_cycles < 1) bad("event_latency_cycles must be >= 1");
  if (cl.runtime_reserve_bytes >= cl.l1_bytes) bad("runtime_reserve_bytes must leave L1 space");

  const ImaConfig& ima = cl.ima;
  if (ima.rows < 1) bad("rows must be >= 1");
  if (ima.rows > 1024) bad("rows exceeds 1024");
  if (ima.cols < 1) bad("cols must be >= 1");
  if (ima.cols > 1024) bad("cols exceeds 1024");
  if (ima.ports < 1) bad("ports must be >= 1");
  if (ima.port_width_bytes < 1) bad("port_width_bytes must be >= 1");
  if (ima.ports >= 1 && ima.port_width_bytes >= 1 &&
      std::uint64_t(ima.ports) * ima.port_width_bytes > ima.rows) {
    bad("ports x port_width_bytes must not exceed rows");
  }
  if (!(ima.t_eval_ns > 0.0)) bad("t_eval_ns must be > 0");
  if (ima.input_bits < 1) bad("input_bits must be >= 1");
  if (ima.weight_bits < 1) bad("weight_bits must be >= 1");

  const InterconnectConfig& ic = cfg.interconnect;
  if (ic.bandwidth_bits_per_cycle == 0) bad("bandwidth_bits_per_cycle must be > 0");
  if (ic.kind == LinkKind::wired && ic.broadcast_enabled) {
    bad("broadcast_enabled requires a wireless interconnect");
  }

  const L2Config& l2 = cfg.l2;
  if (l2.banks < 1) bad("l2 banks must be >= 1");
  if (l2.bank_word_bytes < 1) bad("l2 bank_word_bytes must be >= 1");
  if (l2.capacity_bytes == 0) bad("l2 capacity_bytes must be > 0");
  if (l2.banks >= 1 && l2.bank_word_bytes >= 1 &&
      std::uint64_t(l2.banks) * l2.bank_word_bytes * 8 < ic.bandwidth_bits_per_cycle) {
    bad("l2 aggregate bank bandwidth must cover the interconnect bandwidth");
  }

  return v;
}

/// Immutable validated handle consumed by the simulation engine. Construction
/// throws with the full violation list; once built it is safe to share
/// read-only across concurrently running simulations.
class ValidatedArch {
 public:
  explicit ValidatedArch(const ArchConfig& cfg) : cfg_(cfg) {
    auto violations = validate(cfg);
    if (!violations.empty()) {
      std::string msg = "invalid configuration:";
      for (const auto& s : violations) msg += "\n  - " + s;
      throw ConfigError(msg);
    }
    eval_cycles_ = cycles_from_ns(cfg.cluster.ima.t_eval_ns, cfg.f_clock);
  }

  const ArchConfig& cfg() const { return cfg_; }
  const ClusterConfig& cluster() const { return cfg_.cluster; }
  const ImaConfig& ima() const { return cfg_.cluster.ima; }
  const InterconnectConfig& interconnect() const { return cfg_.interconnect; }
  const L2Config& l2() const { return cfg_.l2; }

  double f_clock() const { return cfg_.f_clock; }
  std::uint32_t n_clusters() const { return cfg_.n_clusters; }
  Cycle eval_cycles() const { return eval_cycles_; }
  Cycle event_latency() const { return cfg_.cluster.event_latency_cycles; }

 private:
  ArchConfig cfg_;
  Cycle eval_cycles_;
};

}  // namespace aimcsim
