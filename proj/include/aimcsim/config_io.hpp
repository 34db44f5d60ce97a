#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "aimcsim/arch.hpp"
#include "aimcsim/types.hpp"

namespace aimcsim {

// The configuration file is a hierarchical JSON document. All values are SI
// units (f_clock in Hz, t_eval_ns in ns) or cycles, as the key names say.
// Required keys: f_clock, n_clusters, interconnect.kind,
// interconnect.bandwidth_bits_per_cycle. Everything else has a default;
// interconnect.latency_cycles defaults to 9 (wired) / 1 (wireless) and
// broadcast_enabled to false (wired) / true (wireless).

namespace detail {

using json = nlohmann::json;

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                                const std::string& scope) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) { known = true; break; }
    }
    if (!known) {
      std::string where = scope.empty() ? "" : " in " + scope;
      throw ConfigError("unknown key '" + key + "'" + where);
    }
  }
}

template <typename T>
T get_number(const json& obj, const char* key, const std::string& scope, T fallback,
             bool required = false) {
  if (!obj.contains(key)) {
    if (required) {
      std::string path = scope.empty() ? key : scope + "." + key;
      throw ConfigError("missing required key " + path);
    }
    return fallback;
  }
  const json& v = obj.at(key);
  if (!v.is_number()) {
    std::string path = scope.empty() ? key : scope + "." + key;
    throw ConfigError("key '" + path + "' must be a number");
  }
  return v.get<T>();
}

inline bool get_bool(const json& obj, const char* key, const std::string& scope, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) {
    throw ConfigError("key '" + scope + "." + key + "' must be a boolean");
  }
  return v.get<bool>();
}

inline ImaConfig parse_ima(const json& obj) {
  reject_unknown_keys(obj, {"rows", "cols", "ports", "port_width_bytes", "t_eval_ns",
                            "input_bits", "weight_bits"},
                      "cluster.ima");
  ImaConfig ima;
  const std::string scope = "cluster.ima";
  ima.rows = get_number<std::uint32_t>(obj, "rows", scope, ima.rows);
  ima.cols = get_number<std::uint32_t>(obj, "cols", scope, ima.cols);
  ima.ports = get_number<std::uint32_t>(obj, "ports", scope, ima.ports);
  ima.port_width_bytes = get_number<std::uint32_t>(obj, "port_width_bytes", scope, ima.port_width_bytes);
  ima.t_eval_ns = get_number<double>(obj, "t_eval_ns", scope, ima.t_eval_ns);
  ima.input_bits = get_number<std::uint32_t>(obj, "input_bits", scope, ima.input_bits);
  ima.weight_bits = get_number<std::uint32_t>(obj, "weight_bits", scope, ima.weight_bits);
  return ima;
}

inline ClusterConfig parse_cluster(const json& obj) {
  reject_unknown_keys(obj, {"n_cores", "l1_bytes", "l1_banks", "dma_channels", "ima",
                            "prog_overhead_cycles", "event_latency_cycles",
                            "tile_overhead_cycles", "runtime_reserve_bytes"},
                      "cluster");
  ClusterConfig cl;
  const std::string scope = "cluster";
  cl.n_cores = get_number<std::uint32_t>(obj, "n_cores", scope, cl.n_cores);
  cl.l1_bytes = get_number<std::uint64_t>(obj, "l1_bytes", scope, cl.l1_bytes);
  cl.l1_banks = get_number<std::uint32_t>(obj, "l1_banks", scope, cl.l1_banks);
  cl.dma_channels = get_number<std::uint32_t>(obj, "dma_channels", scope, cl.dma_channels);
  cl.prog_overhead_cycles = get_number<Cycle>(obj, "prog_overhead_cycles", scope, cl.prog_overhead_cycles);
  cl.event_latency_cycles = get_number<Cycle>(obj, "event_latency_cycles", scope, cl.event_latency_cycles);
  cl.tile_overhead_cycles = get_number<Cycle>(obj, "tile_overhead_cycles", scope, cl.tile_overhead_cycles);
  cl.runtime_reserve_bytes = get_number<std::uint64_t>(obj, "runtime_reserve_bytes", scope, cl.runtime_reserve_bytes);
  if (obj.contains("ima")) {
    if (!obj.at("ima").is_object()) throw ConfigError("key 'cluster.ima' must be an object");
    cl.ima = parse_ima(obj.at("ima"));
  }
  return cl;
}

inline InterconnectConfig parse_interconnect(const json& obj) {
  reject_unknown_keys(obj, {"kind", "bandwidth_bits_per_cycle", "latency_cycles",
                            "broadcast_enabled", "accounting"},
                      "interconnect");
  InterconnectConfig ic;
  if (!obj.contains("kind")) throw ConfigError("missing required key interconnect.kind");
  const json& kind = obj.at("kind");
  if (!kind.is_string()) throw ConfigError("key 'interconnect.kind' must be a string");
  const std::string kind_s = kind.get<std::string>();
  if (kind_s == "wired") ic.kind = LinkKind::wired;
  else if (kind_s == "wireless") ic.kind = LinkKind::wireless;
  else throw ConfigError("interconnect.kind must be 'wired' or 'wireless'");

  const std::string scope = "interconnect";
  ic.bandwidth_bits_per_cycle =
      get_number<std::uint64_t>(obj, "bandwidth_bits_per_cycle", scope, 0, /*required=*/true);
  const Cycle default_latency = ic.kind == LinkKind::wired ? 9 : 1;
  ic.latency_cycles = get_number<Cycle>(obj, "latency_cycles", scope, default_latency);
  ic.broadcast_enabled = get_bool(obj, "broadcast_enabled", scope, ic.kind == LinkKind::wireless);
  if (obj.contains("accounting")) {
    const json& acc = obj.at("accounting");
    if (!acc.is_string()) throw ConfigError("key 'interconnect.accounting' must be a string");
    const std::string acc_s = acc.get<std::string>();
    if (acc_s == "aggregate_shared") ic.accounting = LinkAccounting::aggregate_shared;
    else if (acc_s == "per_direction") ic.accounting = LinkAccounting::per_direction;
    else throw ConfigError("interconnect.accounting must be 'aggregate_shared' or 'per_direction'");
  }
  return ic;
}

inline L2Config parse_l2(const json& obj) {
  reject_unknown_keys(obj, {"banks", "bank_word_bytes", "capacity_bytes"}, "l2");
  L2Config l2;
  const std::string scope = "l2";
  l2.banks = get_number<std::uint32_t>(obj, "banks", scope, l2.banks);
  l2.bank_word_bytes = get_number<std::uint32_t>(obj, "bank_word_bytes", scope, l2.bank_word_bytes);
  l2.capacity_bytes = get_number<std::uint64_t>(obj, "capacity_bytes", scope, l2.capacity_bytes);
  return l2;
}

}  // namespace detail

/// Parses a configuration document, applies defaults, and validates the
/// result. Errors name the offending key or invariant; JSON syntax errors
/// carry the parser's line/column diagnostics.
inline ArchConfig parse_arch_config(std::string_view text) {
  detail::json root;
  try {
    root = detail::json::parse(text);
  } catch (const detail::json::parse_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config document must be a JSON object");

  detail::reject_unknown_keys(root, {"f_clock", "n_clusters", "cluster", "interconnect", "l2"}, "");

  ArchConfig cfg;
  cfg.f_clock = detail::get_number<double>(root, "f_clock", "", 0.0, /*required=*/true);
  cfg.n_clusters = detail::get_number<std::uint32_t>(root, "n_clusters", "", 0, /*required=*/true);
  if (root.contains("cluster")) {
    if (!root.at("cluster").is_object()) throw ConfigError("key 'cluster' must be an object");
    cfg.cluster = detail::parse_cluster(root.at("cluster"));
  }
  if (!root.contains("interconnect")) throw ConfigError("missing required key interconnect.kind");
  if (!root.at("interconnect").is_object()) throw ConfigError("key 'interconnect' must be an object");
  cfg.interconnect = detail::parse_interconnect(root.at("interconnect"));
  if (root.contains("l2")) {
    if (!root.at("l2").is_object()) throw ConfigError("key 'l2' must be an object");
    cfg.l2 = detail::parse_l2(root.at("l2"));
  }

  auto violations = validate(cfg);
  if (!violations.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& s : violations) msg += "\n  - " + s;
    throw ConfigError(msg);
  }
  return cfg;
}

/// Canonical serializer: emits every field explicitly with sorted keys so
/// that parse(render(cfg)) == cfg for any valid configuration.
inline std::string render_arch_config(const ArchConfig& cfg) {
  detail::json j;
  j["f_clock"] = cfg.f_clock;
  j["n_clusters"] = cfg.n_clusters;
  detail::json cl;
  cl["n_cores"] = cfg.cluster.n_cores;
  cl["l1_bytes"] = cfg.cluster.l1_bytes;
  cl["l1_banks"] = cfg.cluster.l1_banks;
  cl["dma_channels"] = cfg.cluster.dma_channels;
  cl["prog_overhead_cycles"] = cfg.cluster.prog_overhead_cycles;
  cl["event_latency_cycles"] = cfg.cluster.event_latency_cycles;
  cl["tile_overhead_cycles"] = cfg.cluster.tile_overhead_cycles;
  cl["runtime_reserve_bytes"] = cfg.cluster.runtime_reserve_bytes;
  detail::json ima;
  ima["rows"] = cfg.cluster.ima.rows;
  ima["cols"] = cfg.cluster.ima.cols;
  ima["ports"] = cfg.cluster.ima.ports;
  ima["port_width_bytes"] = cfg.cluster.ima.port_width_bytes;
  ima["t_eval_ns"] = cfg.cluster.ima.t_eval_ns;
  ima["input_bits"] = cfg.cluster.ima.input_bits;
  ima["weight_bits"] = cfg.cluster.ima.weight_bits;
  cl["ima"] = ima;
  j["cluster"] = cl;
  detail::json ic;
  ic["kind"] = to_string(cfg.interconnect.kind);
  ic["bandwidth_bits_per_cycle"] = cfg.interconnect.bandwidth_bits_per_cycle;
  ic["latency_cycles"] = cfg.interconnect.latency_cycles;
  ic["broadcast_enabled"] = cfg.interconnect.broadcast_enabled;
  ic["accounting"] = to_string(cfg.interconnect.accounting);
  j["interconnect"] = ic;
  detail::json l2;
  l2["banks"] = cfg.l2.banks;
  l2["bank_word_bytes"] = cfg.l2.bank_word_bytes;
  l2["capacity_bytes"] = cfg.l2.capacity_bytes;
  j["l2"] = l2;
  return j.dump(2) + "\n";
}

}  // namespace aimcsim
