#pragma once

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "aimcsim/arch.hpp"
#include "aimcsim/cluster.hpp"
#include "aimcsim/system.hpp"
#include "aimcsim/types.hpp"
#include "aimcsim/workload.hpp"

namespace aimcsim {

/// Theoretical peak throughput of n_cl crossbars running (c_in, c_out) jobs
/// back to back, in GMAC/s. Exact real arithmetic, no cycle rounding:
///   10^-9 * n_cl * c_in * c_out / (T_eval + T_stream_in + T_stream_out)
/// with T_stream_in(out) = c_in(out) / (ports * port_width_bytes * f_clock).
inline double baseline_gmacs(std::uint32_t n_cl, std::uint32_t c_in, std::uint32_t c_out,
                             double t_eval_ns, std::uint32_t ports,
                             std::uint32_t port_width_bytes, double f_clock) {
  if (n_cl == 0) return 0.0;
  if (c_in == 0 || c_out == 0 || ports == 0 || port_width_bytes == 0 || f_clock <= 0.0 ||
      t_eval_ns <= 0.0) {
    throw SimError("baseline_gmacs requires positive arguments");
  }
  const double beat = double(ports) * port_width_bytes * f_clock;
  const double t_si = double(c_in) / beat;
  const double t_so = double(c_out) / beat;
  const double t_eval = t_eval_ns * 1e-9;
  // single-crossbar rate first, so the result is exactly linear in n_cl
  const double one = 1e-9 * double(c_in) * double(c_out) / (t_eval + t_si + t_so);
  return double(n_cl) * one;
}

/// Achieved throughput as a percentage of the baseline:
///   achieved = 10^-9 * f_clock * total_macs / tot_exec_cycles  [GMAC/s]
inline double efficiency_pct(std::uint64_t total_macs, Cycle tot_exec_cycles, double f_clock,
                             double baseline) {
  if (tot_exec_cycles == 0) throw SimError("efficiency_pct with zero cycles");
  if (baseline <= 0.0) throw SimError("efficiency_pct with non-positive baseline");
  const double achieved = 1e-9 * f_clock * double(total_macs) / double(tot_exec_cycles);
  return achieved / baseline * 100.0;
}

inline double achieved_gmacs(std::uint64_t total_macs, Cycle tot_exec_cycles, double f_clock) {
  if (tot_exec_cycles == 0) throw SimError("achieved_gmacs with zero cycles");
  return 1e-9 * f_clock * double(total_macs) / double(tot_exec_cycles);
}

/// Communication-bound lower bound on execution cycles, independent of the
/// event simulator. Data parallelization moves every input to each cluster
/// (once, with broadcast) and all output slices back; pipelining only touches
/// L2 at the endpoints.
inline Cycle comm_roofline_cycles(Strategy strategy, std::uint32_t n_cl, std::uint64_t pixels,
                                  std::uint64_t bytes_in_per_pixel,
                                  std::uint64_t bytes_out_per_pixel,
                                  std::uint64_t link_bits_per_cycle, bool broadcast) {
  if (link_bits_per_cycle == 0) throw SimError("comm_roofline_cycles with zero capacity");
  std::uint64_t read_bytes = 0, write_bytes = 0;
  if (strategy == Strategy::data_parallel) {
    read_bytes = broadcast ? bytes_in_per_pixel : std::uint64_t(n_cl) * bytes_in_per_pixel;
    write_bytes = std::uint64_t(n_cl) * bytes_out_per_pixel;
  } else {
    read_bytes = bytes_in_per_pixel;
    write_bytes = bytes_out_per_pixel;
  }
  return ceil_div(pixels * 8 * (read_bytes + write_bytes), link_bits_per_cycle);
}

/// Compute-bound lower bound: the busiest cluster's total contention-free job
/// cycles, with no overheads.
inline Cycle compute_bound_cycles(const MappingPlan& plan,
                                  const std::vector<LayerDescriptor>& layers,
                                  const ValidatedArch& arch) {
  Cycle worst = 0;
  for (const auto& asgs : plan.per_cluster) {
    Cycle sum = 0;
    for (const auto& a : asgs) {
      LayerDescriptor local = layers.at(a.layer_id);
      local.c_out = a.c_out_width();
      Cycle per_pixel = 0;
      for (const auto& j : jobs_per_pixel(local, arch.ima())) {
        per_pixel += ima_phase_cycles(arch.ima(), j.c_in, j.c_out, arch.f_clock()).total();
      }
      sum += per_pixel * local.out_pixels();
    }
    worst = std::max(worst, sum);
  }
  return worst;
}

/// Wireless-broadcast over wired-unicast speedup predictions from the
/// roofline oracle, one ratio per wired capacity.
inline std::vector<double> predicted_speedup_ratios(const std::vector<std::uint64_t>& wired_caps,
                                                    std::uint64_t wireless_cap,
                                                    std::uint32_t n_cl, std::uint64_t pixels,
                                                    std::uint64_t bytes_in_per_pixel,
                                                    std::uint64_t bytes_out_per_pixel) {
  const Cycle wireless =
      comm_roofline_cycles(Strategy::data_parallel, n_cl, pixels, bytes_in_per_pixel,
                           bytes_out_per_pixel, wireless_cap, /*broadcast=*/true);
  std::vector<double> out;
  out.reserve(wired_caps.size());
  for (std::uint64_t cap : wired_caps) {
    const Cycle wired = comm_roofline_cycles(Strategy::data_parallel, n_cl, pixels,
                                             bytes_in_per_pixel, bytes_out_per_pixel, cap,
                                             /*broadcast=*/false);
    out.push_back(double(wired) / double(wireless));
  }
  return out;
}

/// Aggregated result of one simulation, serializable as a CSV row (frozen
/// column order) or JSON.
struct MetricsReport {
  std::uint32_t n_clusters = 0;
  Strategy strategy = Strategy::pipelining;
  LinkKind kind = LinkKind::wired;
  std::uint64_t bandwidth_bits_per_cycle = 0;
  Cycle latency_cycles = 0;
  bool broadcast = false;
  std::uint64_t iterations = 0;

  Cycle tot_exec_cycles = 0;
  std::uint64_t total_macs = 0;
  double achieved_gmacs = 0.0;
  double baseline_gmacs = 0.0;
  double eta_pct = 0.0;

  Cycle link_busy_cycles = 0;
  double link_utilization = 0.0;
  double ima_utilization = 0.0;
  double dma_utilization = 0.0;
  Cycle link_wait_total = 0;
  std::vector<Cycle> link_wait_per_requester;
  std::uint64_t l1_conflicts = 0;
  std::uint64_t l2_conflicts = 0;
  std::uint64_t l2_read_bytes = 0;
  std::uint64_t l2_write_bytes = 0;
  std::uint64_t broadcast_saved_bytes = 0;
  Cycle input_wait_total = 0;
  std::vector<Cycle> input_wait_per_cluster;

  static std::string csv_header() {
    return "n_clusters,strategy,kind,bandwidth_bits_per_cycle,latency_cycles,broadcast,"
           "iterations,tot_exec_cycles,total_macs,achieved_gmacs,baseline_gmacs,eta_pct,"
           "link_busy_cycles,link_utilization,link_wait_cycles_total,ima_utilization,"
           "dma_utilization,l1_conflicts,l2_conflicts,l2_read_bytes,l2_write_bytes,"
           "broadcast_saved_bytes,input_wait_cycles_total,input_wait_cycles_per_cluster";
  }

  std::string csv_row() const {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%u,%s,%s,%" PRIu64 ",%" PRIu64 ",%d,%" PRIu64 ",%" PRIu64 ",%" PRIu64
                  ",%.6f,%.6f,%.6f,%" PRIu64 ",%.6f,%" PRIu64 ",%.6f,%.6f,%" PRIu64 ",%" PRIu64
                  ",%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%" PRIu64,
                  n_clusters, to_string(strategy), to_string(kind), bandwidth_bits_per_cycle,
                  latency_cycles, broadcast ? 1 : 0, iterations, tot_exec_cycles, total_macs,
                  achieved_gmacs, baseline_gmacs, eta_pct, link_busy_cycles, link_utilization,
                  link_wait_total, ima_utilization, dma_utilization, l1_conflicts, l2_conflicts,
                  l2_read_bytes, l2_write_bytes, broadcast_saved_bytes, input_wait_total);
    std::string row(buf);
    row += ',';
    for (std::size_t i = 0; i < input_wait_per_cluster.size(); ++i) {
      if (i) row += ';';
      row += std::to_string(input_wait_per_cluster[i]);
    }
    return row;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["n_clusters"] = n_clusters;
    j["strategy"] = to_string(strategy);
    j["kind"] = to_string(kind);
    j["bandwidth_bits_per_cycle"] = bandwidth_bits_per_cycle;
    j["latency_cycles"] = latency_cycles;
    j["broadcast"] = broadcast;
    j["iterations"] = iterations;
    j["tot_exec_cycles"] = tot_exec_cycles;
    j["total_macs"] = total_macs;
    j["achieved_gmacs"] = achieved_gmacs;
    j["baseline_gmacs"] = baseline_gmacs;
    j["eta_pct"] = eta_pct;
    j["link_busy_cycles"] = link_busy_cycles;
    j["link_utilization"] = link_utilization;
    j["link_wait_cycles_total"] = link_wait_total;
    j["link_wait_cycles_per_requester"] = link_wait_per_requester;
    j["ima_utilization"] = ima_utilization;
    j["dma_utilization"] = dma_utilization;
    j["l1_conflicts"] = l1_conflicts;
    j["l2_conflicts"] = l2_conflicts;
    j["l2_read_bytes"] = l2_read_bytes;
    j["l2_write_bytes"] = l2_write_bytes;
    j["broadcast_saved_bytes"] = broadcast_saved_bytes;
    j["input_wait_cycles_total"] = input_wait_total;
    j["input_wait_cycles_per_cluster"] = input_wait_per_cluster;
    return j;
  }
};

/// The baseline for a plan sums each working cluster's single-IMA peak at its
/// own job shape, which reduces to n_cl identical terms for the uniform
/// benchmarks.
inline double plan_baseline_gmacs(const MappingPlan& plan,
                                  const std::vector<LayerDescriptor>& layers,
                                  const ValidatedArch& arch) {
  double sum = 0.0;
  const ImaConfig& ima = arch.ima();
  for (const auto& asgs : plan.per_cluster) {
    if (asgs.empty()) continue;
    const auto& a = asgs.front();
    const LayerDescriptor& l = layers.at(a.layer_id);
    const std::uint32_t c_in = std::min<std::uint32_t>(l.c_in * l.kernel * l.kernel, ima.rows);
    const std::uint32_t c_out = std::min<std::uint32_t>(a.c_out_width(), ima.cols);
    sum += baseline_gmacs(1, c_in, c_out, ima.t_eval_ns, ima.ports, ima.port_width_bytes,
                          arch.f_clock());
  }
  return sum;
}

inline MetricsReport build_report(const ValidatedArch& arch, const MappingPlan& plan,
                                  const std::vector<LayerDescriptor>& layers,
                                  const RunStats& run) {
  MetricsReport m;
  m.n_clusters = arch.n_clusters();
  m.strategy = plan.strategy;
  m.kind = arch.interconnect().kind;
  m.bandwidth_bits_per_cycle = arch.interconnect().bandwidth_bits_per_cycle;
  m.latency_cycles = arch.interconnect().latency_cycles;
  m.broadcast = arch.interconnect().broadcast_enabled;
  m.iterations = run.iterations;
  m.tot_exec_cycles = run.tot_exec_cycles;
  m.total_macs = run.total_macs;
  m.achieved_gmacs = achieved_gmacs(run.total_macs, run.tot_exec_cycles, arch.f_clock());
  m.baseline_gmacs = plan_baseline_gmacs(plan, layers, arch);
  m.eta_pct = efficiency_pct(run.total_macs, run.tot_exec_cycles, arch.f_clock(),
                             m.baseline_gmacs);
  m.link_busy_cycles = run.link_busy_cycles;
  const double tot = double(run.tot_exec_cycles);
  if (tot > 0) {
    m.link_utilization = double(run.link_busy_cycles) / tot;
    Cycle ima_sum = 0, dma_sum = 0;
    for (Cycle c : run.ima_busy) ima_sum += c;
    for (Cycle c : run.dma_busy) dma_sum += c;
    m.ima_utilization = double(ima_sum) / (tot * arch.n_clusters());
    m.dma_utilization =
        double(dma_sum) / (tot * arch.n_clusters() * std::max<std::uint32_t>(run.dma_channels, 1));
  }
  m.link_wait_per_requester = run.link_requester_wait;
  for (Cycle c : run.link_requester_wait) m.link_wait_total += c;
  m.l1_conflicts = run.l1_conflicts;
  m.l2_conflicts = run.l2_conflicts;
  m.l2_read_bytes = run.l2_read_bytes;
  m.l2_write_bytes = run.l2_write_bytes;
  m.broadcast_saved_bytes = run.broadcast_saved_bytes;
  m.input_wait_per_cluster = run.input_wait_cycles;
  for (Cycle c : run.input_wait_cycles) m.input_wait_total += c;
  return m;
}

}  // namespace aimcsim
