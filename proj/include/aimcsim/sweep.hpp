#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aimcsim/arch.hpp"
#include "aimcsim/metrics.hpp"
#include "aimcsim/system.hpp"
#include "aimcsim/types.hpp"
#include "aimcsim/workload.hpp"

namespace aimcsim {

/// The built-in synthetic benchmark: 1x1 convolutions that exactly fill the
/// crossbar. Pipelining runs a chain of identical c x c layers, one per
/// cluster; data parallelization runs a single c -> c*n_cl layer whose output
/// slices land one per cluster. `iterations` is the spatial pixel count.
inline std::pair<std::vector<LayerDescriptor>, MappingPlan> make_benchmark(
    Strategy strategy, std::uint32_t n_cl, std::uint64_t iterations, std::uint32_t channels) {
  if (iterations == 0) throw ConfigError("benchmark iterations must be > 0");
  std::vector<LayerDescriptor> layers;
  if (strategy == Strategy::pipelining) {
    for (std::uint32_t i = 0; i < n_cl; ++i) {
      LayerDescriptor l;
      l.name = "conv" + std::to_string(i);
      l.c_in = channels;
      l.c_out = channels;
      l.kernel = 1;
      l.w_in = static_cast<std::uint32_t>(iterations);
      l.h_in = 1;
      l.stride = 1;
      layers.push_back(std::move(l));
    }
    return {layers, map_pipelining(layers, n_cl)};
  }
  LayerDescriptor l;
  l.name = "conv0";
  l.c_in = channels;
  l.c_out = channels * n_cl;
  l.kernel = 1;
  l.w_in = static_cast<std::uint32_t>(iterations);
  l.h_in = 1;
  l.stride = 1;
  layers.push_back(l);
  return {layers, map_data_parallel(l, n_cl)};
}

/// Rescales k=1, stride-1 layers to a requested output pixel count.
inline void apply_iterations(std::vector<LayerDescriptor>& layers, std::uint64_t iterations) {
  if (iterations == 0) return;
  for (auto& l : layers) {
    if (l.kernel != 1 || l.stride != 1) {
      throw ConfigError("--iterations can only rescale 1x1 stride-1 layers");
    }
    l.w_in = static_cast<std::uint32_t>(iterations);
    l.h_in = 1;
  }
}

struct RunOutcome {
  MetricsReport report;
  RunStats stats;
};

inline RunOutcome simulate(const ArchConfig& cfg, const MappingPlan& plan,
                           const std::vector<LayerDescriptor>& layers, SimOptions opt = {}) {
  ValidatedArch arch(cfg);
  SystemSim sim(arch, plan, layers, opt);
  RunOutcome out;
  out.stats = sim.run();
  out.report = build_report(arch, plan, layers, out.stats);
  return out;
}

/// One point per (n_clusters x interconnect variant x strategy).
struct SweepSpec {
  std::vector<std::uint32_t> n_clusters;
  std::vector<InterconnectConfig> variants;
  std::vector<Strategy> strategies;
  std::string benchmark = "conv1x1";
  std::uint64_t iterations = 64;
  std::uint64_t max_points = 4096;
  std::string out;
};

inline InterconnectConfig parse_interconnect_variant(const nlohmann::json& v) {
  InterconnectConfig ic;
  const std::string kind = v.at("kind").get<std::string>();
  if (kind == "wired") ic.kind = LinkKind::wired;
  else if (kind == "wireless") ic.kind = LinkKind::wireless;
  else throw ConfigError("interconnect kind must be 'wired' or 'wireless'");
  ic.bandwidth_bits_per_cycle = v.at("bandwidth_bits_per_cycle").get<std::uint64_t>();
  ic.latency_cycles = v.contains("latency_cycles")
                          ? v.at("latency_cycles").get<Cycle>()
                          : (ic.kind == LinkKind::wired ? 9 : 1);
  ic.broadcast_enabled = v.contains("broadcast_enabled")
                             ? v.at("broadcast_enabled").get<bool>()
                             : ic.kind == LinkKind::wireless;
  return ic;
}

inline SweepSpec parse_sweep_spec(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("sweep spec syntax error: ") + e.what());
  }
  SweepSpec s;
  for (const auto& v : j.at("n_clusters")) s.n_clusters.push_back(v.get<std::uint32_t>());
  for (const auto& v : j.at("interconnects")) s.variants.push_back(parse_interconnect_variant(v));
  for (const auto& v : j.at("strategies")) {
    const std::string name = v.get<std::string>();
    if (name == "pipelining") s.strategies.push_back(Strategy::pipelining);
    else if (name == "data_parallel") s.strategies.push_back(Strategy::data_parallel);
    else throw ConfigError("unknown strategy '" + name + "'");
  }
  if (s.n_clusters.empty() || s.variants.empty() || s.strategies.empty()) {
    throw ConfigError("sweep spec lists must be non-empty");
  }
  if (j.contains("benchmark")) s.benchmark = j.at("benchmark").get<std::string>();
  if (j.contains("iterations")) s.iterations = j.at("iterations").get<std::uint64_t>();
  if (j.contains("max_points")) s.max_points = j.at("max_points").get<std::uint64_t>();
  if (j.contains("out")) s.out = j.at("out").get<std::string>();
  return s;
}

/// Runs the sweep and returns the CSV table. Rows come out in the spec's
/// nested axis order (n_clusters, variant, strategy), so repeated runs are
/// byte-identical.
inline std::string run_sweep(const ArchConfig& base, const SweepSpec& spec) {
  if (spec.benchmark != "conv1x1") {
    throw ConfigError("unknown benchmark '" + spec.benchmark + "'");
  }
  const std::uint64_t points =
      spec.n_clusters.size() * spec.variants.size() * spec.strategies.size();
  if (points > spec.max_points) {
    throw ConfigError("sweep cap exceeded: " + std::to_string(points) + " points > max_points " +
                      std::to_string(spec.max_points));
  }
  std::string csv = MetricsReport::csv_header() + "\n";
  for (std::uint32_t n_cl : spec.n_clusters) {
    for (const auto& variant : spec.variants) {
      for (Strategy strategy : spec.strategies) {
        ArchConfig cfg = base;
        cfg.n_clusters = n_cl;
        cfg.interconnect = variant;
        auto [layers, plan] =
            make_benchmark(strategy, n_cl, spec.iterations, cfg.cluster.ima.rows);
        csv += simulate(cfg, plan, layers).report.csv_row() + "\n";
      }
    }
  }
  return csv;
}

struct Fig4Result {
  std::string efficiency_csv;
  std::string throughput_csv;
  std::string summary;
};

namespace detail {
inline std::string fmt(double v, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}
}  // namespace detail

/// Efficiency and throughput trend tables over cluster count for all four
/// interconnect variants and both mappings, plus the derived
/// wireless-over-wired speedups next to the roofline oracle's predictions.
/// Pipelining points run long enough (1024 iterations) to amortize pipeline
/// fill; data-parallel points use the 64-pixel benchmark.
inline Fig4Result reproduce_figure4(const ArchConfig& base, std::uint64_t pipe_iterations = 1024,
                                    std::uint64_t dp_iterations = 64) {
  const std::vector<std::uint32_t> cls = {1, 2, 4, 8, 16};
  struct Variant {
    const char* label;
    InterconnectConfig ic;
  };
  const std::vector<Variant> variants = {
      {"wired-64", {LinkKind::wired, 64, 9, false, LinkAccounting::aggregate_shared}},
      {"wired-128", {LinkKind::wired, 128, 9, false, LinkAccounting::aggregate_shared}},
      {"wired-256", {LinkKind::wired, 256, 9, false, LinkAccounting::aggregate_shared}},
      {"wireless-256", {LinkKind::wireless, 256, 1, true, LinkAccounting::aggregate_shared}},
  };

  std::string eff = "n_clusters,interconnect,strategy,iterations,eta_pct\n";
  std::string thr = "n_clusters,interconnect,strategy,iterations,gmacs\n";
  std::string summary;

  std::map<std::string, RunOutcome> runs;
  for (std::uint32_t n_cl : cls) {
    for (const auto& v : variants) {
      for (Strategy strategy : {Strategy::pipelining, Strategy::data_parallel}) {
        ArchConfig cfg = base;
        cfg.n_clusters = n_cl;
        cfg.interconnect = v.ic;
        const std::uint64_t iters =
            strategy == Strategy::pipelining ? pipe_iterations : dp_iterations;
        auto [layers, plan] = make_benchmark(strategy, n_cl, iters, cfg.cluster.ima.rows);
        RunOutcome out = simulate(cfg, plan, layers);
        const std::string key =
            std::to_string(n_cl) + "/" + v.label + "/" + to_string(strategy);
        eff += std::to_string(n_cl) + "," + v.label + "," + to_string(strategy) + "," +
               std::to_string(iters) + "," + detail::fmt(out.report.eta_pct, 3) + "\n";
        thr += std::to_string(n_cl) + "," + v.label + "," + to_string(strategy) + "," +
               std::to_string(iters) + "," + detail::fmt(out.report.achieved_gmacs, 3) + "\n";
        runs.emplace(key, std::move(out));
      }
    }
  }

  const ImaConfig& ima = base.cluster.ima;
  const std::uint64_t bpp = ima.rows;  // bytes per pixel per direction (8-bit channels)

  const auto& wless16 = runs.at("16/wireless-256/data_parallel").report;
  summary += "data-parallel speedup at 16 clusters, wireless-256 (broadcast) over wired:\n";
  const std::vector<std::pair<const char*, std::uint64_t>> wired = {
      {"wired-64", 64}, {"wired-128", 128}, {"wired-256", 256}};
  const auto predictions =
      predicted_speedup_ratios({64, 128, 256}, 256, 16, dp_iterations, bpp, bpp);
  for (std::size_t i = 0; i < wired.size(); ++i) {
    const auto& w = runs.at(std::string("16/") + wired[i].first + "/data_parallel").report;
    const double simulated = double(w.tot_exec_cycles) / double(wless16.tot_exec_cycles);
    summary += std::string("  ") + wired[i].first + ": simulated " +
               detail::fmt(simulated) + "x, roofline " + detail::fmt(predictions[i]) + "x\n";
  }

  double pipe_min = 1e9, pipe_max = -1e9;
  for (std::uint32_t n_cl : {2u, 4u, 8u, 16u}) {
    const auto& r = runs.at(std::to_string(n_cl) + "/wired-256/pipelining").report;
    pipe_min = std::min(pipe_min, r.eta_pct);
    pipe_max = std::max(pipe_max, r.eta_pct);
  }
  summary += "pipelining efficiency spread over {2,4,8,16} clusters (wired-256): " +
             detail::fmt(pipe_max - pipe_min) + " points\n";

  const auto& pw = runs.at("16/wired-256/pipelining").report;
  const auto& pl = runs.at("16/wireless-256/pipelining").report;
  const double wait_delta =
      pw.input_wait_total > 0
          ? 100.0 * double(pw.input_wait_total - pl.input_wait_total) / double(pw.input_wait_total)
          : 0.0;
  summary += "pipelining input-wait reduction, 1-cycle vs 9-cycle latency (16 clusters): " +
             detail::fmt(wait_delta) + " %\n";

  const auto& single = runs.at("1/wired-256/pipelining").report;
  summary += "single-cluster efficiency (wired-256): " + detail::fmt(single.eta_pct) + " %\n";
  double peak = 0.0;
  std::string peak_at;
  for (const auto& [key, out] : runs) {
    if (out.report.achieved_gmacs > peak) {
      peak = out.report.achieved_gmacs;
      peak_at = key;
    }
  }
  summary += "peak throughput: " + detail::fmt(peak / 1000.0, 3) + " TMAC/s (" + peak_at + ")\n";

  return {std::move(eff), std::move(thr), std::move(summary)};
}

}  // namespace aimcsim
