// Acceptance suite: runs every acceptance criterion end to end and prints one
// pass/fail line per criterion. Exits non-zero if any enforced criterion
// fails.

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aimcsim/arch.hpp"
#include "aimcsim/cluster.hpp"
#include "aimcsim/config_io.hpp"
#include "aimcsim/metrics.hpp"
#include "aimcsim/sweep.hpp"
#include "aimcsim/system.hpp"

using namespace aimcsim;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s -- %s\n", pass ? "PASS" : "FAIL", id, what.c_str(),
              detail.c_str());
  if (!pass) ++failures;
}

void info(int id, const std::string& what, const std::string& detail) {
  std::printf("[INFO] criterion %2d: %s -- %s\n", id, what.c_str(), detail.c_str());
}

ArchConfig base_cfg(std::uint32_t n_cl) {
  ArchConfig cfg;
  cfg.f_clock = 350e6;
  cfg.n_clusters = n_cl;
  cfg.interconnect = {LinkKind::wired, 256, 9, false, LinkAccounting::aggregate_shared};
  return cfg;
}

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

// --- criterion 1: unit conversion exactness --------------------------------

void criterion1() {
  const bool pass = bits_per_cycle(22.4, 350e6) == 64.0 &&
                    bits_per_cycle(44.8, 350e6) == 128.0 &&
                    bits_per_cycle(89.6, 350e6) == 256.0;
  report(1, pass, "unit conversion exactness",
         "22.4/44.8/89.6 Gbit/s -> " + fmt(bits_per_cycle(22.4, 350e6), 0) + "/" +
             fmt(bits_per_cycle(44.8, 350e6), 0) + "/" + fmt(bits_per_cycle(89.6, 350e6), 0) +
             " bit/cycle at 350 MHz, zero error");
}

// --- criterion 2: baseline formula ------------------------------------------

void criterion2() {
  const double one = baseline_gmacs(1, 256, 256, 130.0, 16, 4, 350e6);
  const double sixteen = baseline_gmacs(16, 256, 256, 130.0, 16, 4, 350e6);
  const bool pass = std::fabs(one - 428.74) / 428.74 < 0.001 && sixteen == 16.0 * one;
  report(2, pass, "baseline formula",
         "1 cluster = " + fmt(one, 2) + " GMAC/s (428.74 within 0.1%), 16 clusters = " +
             fmt(sixteen / 1000.0, 3) + " TMAC/s (exactly 16x)");
}

// --- criterion 3: contention-free soundness ---------------------------------

void criterion3() {
  ArchConfig cfg = base_cfg(1);
  cfg.cluster.prog_overhead_cycles = 0;
  cfg.cluster.tile_overhead_cycles = 0;
  ValidatedArch arch(cfg);
  SimEngine eng;
  const ResourceId res = eng.add_resource("cl0.ima");
  L1Arbiter arb(eng, arch.cluster().l1_banks);
  const auto slot = arb.add_requester(L1Arbiter::Class::ima);
  ImaUnit ima(eng, res, arch, arb, slot);
  ImaUnit::Job job;
  job.c_in = 256;
  job.c_out = 256;
  eng.schedule(0, [&] { ima.run(std::move(job)); });
  const Cycle end = eng.run_until_idle();
  const double base = baseline_gmacs(1, 256, 256, 130.0, 16, 4, 350e6);
  const double eta = efficiency_pct(256 * 256, end, 350e6, base);
  const bool pass = end == 54 && eta >= 99.0;
  report(3, pass, "contention-free soundness",
         "one 256x256 job = " + std::to_string(end) + " cycles (4+46+4), eta = " + fmt(eta, 2) +
             "% (>= 99%)");
}

// --- criterion 4: speedup-ratio reproduction --------------------------------

void criterion4() {
  const std::vector<std::uint64_t> wired = {64, 128, 256};
  const std::vector<double> target_ratio = {8.2, 4.1, 2.1};
  std::vector<std::uint64_t> cycles;
  for (std::uint64_t bw : wired) {
    ArchConfig cfg = base_cfg(16);
    cfg.interconnect = {LinkKind::wired, bw, 9, false, LinkAccounting::aggregate_shared};
    auto [layers, plan] = make_benchmark(Strategy::data_parallel, 16, 64, 256);
    cycles.push_back(simulate(cfg, plan, layers).report.tot_exec_cycles);
  }
  ArchConfig cfg = base_cfg(16);
  cfg.interconnect = {LinkKind::wireless, 256, 1, true, LinkAccounting::aggregate_shared};
  auto [layers, plan] = make_benchmark(Strategy::data_parallel, 16, 64, 256);
  const std::uint64_t wireless_cycles = simulate(cfg, plan, layers).report.tot_exec_cycles;

  const auto predicted = predicted_speedup_ratios(wired, 256, 16, 64, 256, 256);
  bool pass = true;
  std::string detail = "simulated ";
  std::vector<double> simulated;
  for (std::size_t i = 0; i < wired.size(); ++i) {
    const double ratio = double(cycles[i]) / double(wireless_cycles);
    simulated.push_back(ratio);
    pass = pass && std::fabs(ratio - target_ratio[i]) / target_ratio[i] <= 0.25;
    detail += fmt(ratio, 2) + (i + 1 < wired.size() ? "/" : "");
  }
  pass = pass && simulated[0] > simulated[1] && simulated[1] > simulated[2];
  pass = pass && std::fabs(predicted[0] - 7.53) < 0.1 && std::fabs(predicted[1] - 3.76) < 0.1 &&
         std::fabs(predicted[2] - 1.88) < 0.1;
  detail += "x vs 8.2/4.1/2.1 (within 25%, decreasing); roofline predicts " +
            fmt(predicted[0], 2) + "/" + fmt(predicted[1], 2) + "/" + fmt(predicted[2], 2) + "x";
  report(4, pass, "speedup-ratio reproduction (16 CL, data parallel, 64 px)", detail);
}

// --- criterion 5: pipelining flatness ----------------------------------------

void criterion5() {
  // 64 pixels cannot amortize the (N_cl - 1)-stage fill, so the flatness
  // check runs the benchmark long enough to reach steady state.
  const std::uint64_t iterations = 1024;
  double lo = 1e9, hi = -1e9;
  std::string etas;
  for (std::uint32_t n : {2u, 4u, 8u, 16u}) {
    auto [layers, plan] = make_benchmark(Strategy::pipelining, n, iterations, 256);
    const auto out = simulate(base_cfg(n), plan, layers);
    lo = std::min(lo, out.report.eta_pct);
    hi = std::max(hi, out.report.eta_pct);
    etas += fmt(out.report.eta_pct, 1) + (n == 16 ? "" : "/");
  }
  const bool pass = hi - lo <= 5.0;
  report(5, pass, "pipelining flatness over {2,4,8,16} clusters",
         "eta = " + etas + "%, spread " + fmt(hi - lo, 2) + " points (<= 5), " +
             std::to_string(iterations) + " iterations, default overheads");
}

// --- criterion 6: broadcast invariant ---------------------------------------

void criterion6() {
  bool pass = true;
  std::string detail;
  for (std::uint32_t n : {2u, 4u, 8u, 16u}) {
    std::uint64_t reads[2], cyc[2];
    for (int enabled = 0; enabled < 2; ++enabled) {
      ArchConfig cfg = base_cfg(n);
      cfg.interconnect = {LinkKind::wireless, 256, 1, enabled == 1,
                          LinkAccounting::aggregate_shared};
      auto [layers, plan] = make_benchmark(Strategy::data_parallel, n, 64, 256);
      const auto out = simulate(cfg, plan, layers);
      reads[enabled] = out.report.l2_read_bytes;
      cyc[enabled] = out.report.tot_exec_cycles;
    }
    const bool exact = reads[0] == std::uint64_t(n) * reads[1];
    const bool no_slower = cyc[1] <= cyc[0];
    pass = pass && exact && no_slower;
    detail += std::to_string(n) + "CL:" + std::to_string(reads[0] / reads[1]) + "x ";
  }
  report(6, pass, "broadcast invariant (data parallel)",
         "input-read reduction " + detail + "(exactly N_cl), cycles never increased");
}

// --- criterion 7: latency benefit --------------------------------------------

void criterion7() {
  Cycle waits[2];
  for (int idx = 0; idx < 2; ++idx) {
    ArchConfig cfg = base_cfg(16);
    cfg.interconnect.latency_cycles = idx == 0 ? 9 : 1;
    auto [layers, plan] = make_benchmark(Strategy::pipelining, 16, 1024, 256);
    const auto out = simulate(cfg, plan, layers);
    waits[idx] = out.report.input_wait_total;
  }
  const bool pass = waits[1] < waits[0];
  const double pct = 100.0 * double(waits[0] - waits[1]) / double(waits[0]);
  report(7, pass, "latency benefit (pipelining, 9 -> 1 cycles)",
         "summed input waits " + std::to_string(waits[0]) + " -> " + std::to_string(waits[1]) +
             " cycles (reduction " + fmt(pct, 1) + "%, reported not enforced)");
}

// --- criterion 8: lower-bound soundness --------------------------------------

void criterion8() {
  std::mt19937 rng(20240811);
  int checked = 0, violations = 0;
  for (int i = 0; i < 200; ++i) {
    const std::uint32_t n_cl = 1 + rng() % 4;
    const bool wireless = rng() % 2;
    const std::uint64_t bw = std::vector<std::uint64_t>{64, 128, 256}[rng() % 3];
    ArchConfig cfg = base_cfg(n_cl);
    cfg.interconnect = {wireless ? LinkKind::wireless : LinkKind::wired, bw,
                        wireless ? Cycle{1} : Cycle{9}, wireless && (rng() % 2 == 0),
                        LinkAccounting::aggregate_shared};
    cfg.cluster.prog_overhead_cycles = rng() % 200;
    cfg.cluster.tile_overhead_cycles = rng() % 60;
    cfg.cluster.event_latency_cycles = 1 + rng() % 4;
    const std::uint32_t channels = 1 + rng() % 512;
    const std::uint64_t pixels = 1 + rng() % 24;
    const Strategy strategy = rng() % 2 ? Strategy::pipelining : Strategy::data_parallel;

    ValidatedArch arch(cfg);
    auto [layers, plan] = make_benchmark(strategy, n_cl, pixels, channels);
    SystemSim sim(arch, plan, layers);
    const auto stats = sim.run();

    const Cycle compute = compute_bound_cycles(plan, layers, arch);
    // per-pixel bytes: floor of the slice width is a valid lower bound
    const std::uint64_t out_pp = strategy == Strategy::data_parallel
                                     ? layers[0].c_out / n_cl
                                     : layers.back().c_out;
    const Cycle roof =
        comm_roofline_cycles(strategy, n_cl, pixels, layers[0].c_in, out_pp, bw,
                             cfg.interconnect.broadcast_enabled);
    ++checked;
    if (stats.tot_exec_cycles < std::max(compute, roof)) ++violations;
  }
  report(8, violations == 0, "lower-bound soundness (200 randomized configurations)",
         std::to_string(checked) + " runs, " + std::to_string(violations) +
             " below max(compute bound, comm roofline)");
}

// --- criterion 9: determinism -------------------------------------------------

void criterion9() {
  SweepSpec spec;
  spec.n_clusters = {1, 2, 4};
  spec.variants = {{LinkKind::wired, 64, 9, false, LinkAccounting::aggregate_shared},
                   {LinkKind::wireless, 256, 1, true, LinkAccounting::aggregate_shared}};
  spec.strategies = {Strategy::pipelining, Strategy::data_parallel};
  spec.iterations = 32;
  const ArchConfig base = base_cfg(1);
  const std::string csv1 = run_sweep(base, spec);
  const std::string csv2 = run_sweep(base, spec);

  auto trace_of = [&] {
    auto [layers, plan] = make_benchmark(Strategy::data_parallel, 4, 32, 256);
    ArchConfig cfg = base_cfg(4);
    const auto out = simulate(cfg, plan, layers);
    std::ostringstream os;
    out.stats.timeline.write_jsonl(os, out.stats.resource_names);
    return os.str();
  };
  const std::string t1 = trace_of();
  const std::string t2 = trace_of();

  const bool pass = csv1 == csv2 && t1 == t2;
  report(9, pass, "determinism",
         "sweep CSV (" + std::to_string(csv1.size()) + " bytes) and trace (" +
             std::to_string(t1.size()) + " bytes) byte-identical across repeated runs");
}

// --- criterion 10: desk-scale absolutes reported, not enforced ----------------

void criterion10() {
  auto fig4 = reproduce_figure4(base_cfg(16));
  std::string peak_line, single_line;
  std::istringstream ss(fig4.summary);
  for (std::string line; std::getline(ss, line);) {
    if (line.rfind("peak throughput", 0) == 0) peak_line = line;
    if (line.rfind("single-cluster efficiency", 0) == 0) single_line = line;
  }
  info(10, "absolute peak and single-CL efficiency (calibration-sensitive)",
       single_line + "; " + peak_line);
  report(10, !peak_line.empty() && !single_line.empty(),
         "informative reporting via reproduce-fig4",
         "both figures reported by the harness instead of being enforced");
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  if (failures == 0) {
    std::printf("all acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d criterion(s) failed\n", failures);
  return 1;
}
