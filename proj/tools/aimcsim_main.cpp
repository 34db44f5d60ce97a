// Command-line front end: single runs, parameter sweeps, trend-figure
// reproduction, and config validation for the cluster-based AIMC timing
// simulator.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "aimcsim/config_io.hpp"
#include "aimcsim/metrics.hpp"
#include "aimcsim/sweep.hpp"
#include "aimcsim/system.hpp"
#include "aimcsim/workload.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write " + path);
  out << text;
}

aimcsim::Strategy parse_strategy(const std::string& name) {
  if (name == "pipelining") return aimcsim::Strategy::pipelining;
  if (name == "data_parallel") return aimcsim::Strategy::data_parallel;
  throw aimcsim::ConfigError("strategy must be 'pipelining' or 'data_parallel'");
}

}  // namespace

int main(int argc, char** argv) {
  // --seedless is reserved: everything is deterministic, so the flag is
  // accepted bare and rejected with any value.
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]).rfind("--seedless=", 0) == 0) {
      std::cerr << "--seedless takes no value; every simulation is deterministic\n";
      return kExitValidation;
    }
  }

  CLI::App app{"cycle-approximate timing simulator for many-cluster analog "
               "in-memory-computing systems"};
  app.require_subcommand(1);

  // run
  std::string run_config, run_layers, run_strategy = "pipelining";
  std::string run_trace, run_out;
  std::uint64_t run_iterations = 0;
  auto* run = app.add_subcommand("run", "simulate one configuration and workload");
  run->add_option("--config", run_config, "architecture config file")->required();
  run->add_option("--layers", run_layers, "layer table file")->required();
  run->add_option("--strategy", run_strategy, "pipelining | data_parallel");
  run->add_option("--trace", run_trace, "write a JSON-lines timeline trace here");
  run->add_option("--out", run_out, "write the metrics report (JSON) here");
  run->add_option("--iterations", run_iterations,
                  "override the spatial pixel count (1x1 stride-1 layers only)");
  run->add_flag("--seedless", "reserved; every simulation is already deterministic")
      ->disable_flag_override();

  // sweep
  std::string sweep_config, sweep_spec_path, sweep_out;
  auto* sweep = app.add_subcommand("sweep", "run the cartesian parameter sweep from a spec file");
  sweep->add_option("--config", sweep_config, "base architecture config file")->required();
  sweep->add_option("--spec", sweep_spec_path, "sweep spec (JSON)")->required();
  sweep->add_option("--out", sweep_out, "CSV output path (overrides the spec's `out`)");

  // reproduce-fig4
  std::string fig4_config, fig4_dir = ".";
  auto* fig4 = app.add_subcommand(
      "reproduce-fig4", "efficiency/throughput trend tables for both mappings and all links");
  fig4->add_option("--config", fig4_config, "base architecture config file")->required();
  fig4->add_option("--out", fig4_dir, "directory for the two CSV tables");

  // validate-config
  std::string val_config;
  auto* val = app.add_subcommand("validate-config", "check a config file and report violations");
  val->add_option("--config", val_config, "architecture config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      aimcsim::ArchConfig cfg;
      std::vector<aimcsim::LayerDescriptor> layers;
      try {
        cfg = aimcsim::parse_arch_config(slurp(run_config));
        layers = aimcsim::parse_layer_table(slurp(run_layers));
        if (layers.empty()) throw aimcsim::ConfigError("layer table is empty");
        aimcsim::apply_iterations(layers, run_iterations);
      } catch (const aimcsim::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
      }
      const auto strategy = parse_strategy(run_strategy);
      aimcsim::MappingPlan plan;
      if (strategy == aimcsim::Strategy::pipelining) {
        plan = aimcsim::map_pipelining(layers, cfg.n_clusters);
      } else {
        if (layers.size() != 1) {
          std::cerr << "data_parallel expects a single-layer table\n";
          return kExitValidation;
        }
        plan = aimcsim::map_data_parallel(layers.front(), cfg.n_clusters);
      }
      auto out = aimcsim::simulate(cfg, plan, layers);
      const std::string report = out.report.to_json().dump(2) + "\n";
      std::cout << report;
      if (!run_out.empty()) spill(run_out, report);
      if (!run_trace.empty()) {
        std::ostringstream trace;
        out.stats.timeline.write_jsonl(trace, out.stats.resource_names);
        spill(run_trace, trace.str());
      }
      return 0;
    }

    if (*sweep) {
      aimcsim::ArchConfig cfg;
      aimcsim::SweepSpec spec;
      try {
        cfg = aimcsim::parse_arch_config(slurp(sweep_config));
        spec = aimcsim::parse_sweep_spec(slurp(sweep_spec_path));
      } catch (const aimcsim::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
      }
      const std::string csv = aimcsim::run_sweep(cfg, spec);
      const std::string out_path = !sweep_out.empty() ? sweep_out : spec.out;
      if (out_path.empty()) {
        std::cout << csv;
      } else {
        spill(out_path, csv);
        std::cout << "wrote " << out_path << "\n";
      }
      return 0;
    }

    if (*fig4) {
      aimcsim::ArchConfig cfg;
      try {
        cfg = aimcsim::parse_arch_config(slurp(fig4_config));
      } catch (const aimcsim::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
      }
      auto result = aimcsim::reproduce_figure4(cfg);
      spill(fig4_dir + "/fig4_efficiency.csv", result.efficiency_csv);
      spill(fig4_dir + "/fig4_throughput.csv", result.throughput_csv);
      std::cout << result.summary;
      std::cout << "wrote " << fig4_dir << "/fig4_efficiency.csv and "
                << fig4_dir << "/fig4_throughput.csv\n";
      return 0;
    }

    if (*val) {
      std::string text;
      try {
        text = slurp(val_config);
      } catch (const std::ios_base::failure& e) {
        std::cerr << e.what() << "\n";
        return kExitIo;
      }
      try {
        aimcsim::parse_arch_config(text);
      } catch (const aimcsim::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
      }
      std::cout << "OK\n";
      return 0;
    }
  } catch (const std::ios_base::failure& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  } catch (const aimcsim::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  } catch (const aimcsim::SimError& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
