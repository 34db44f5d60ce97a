#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aimcsim/arch.hpp"
#include "aimcsim/types.hpp"

namespace aimcsim {

/// A convolution layer. Activations are 8-bit, so bytes_per_elem stays 1.
struct LayerDescriptor {
  std::string name;
  std::uint32_t c_in = 0;
  std::uint32_t c_out = 0;
  std::uint32_t kernel = 1;
  std::uint32_t w_in = 0;
  std::uint32_t h_in = 1;
  std::uint32_t stride = 1;
  std::uint32_t bytes_per_elem = 1;

  std::uint32_t w_out() const {
    return w_in >= kernel ? (w_in - kernel) / stride + 1 : 0;
  }
  std::uint32_t h_out() const {
    if (h_in == 1 && kernel == 1) return 1;
    return h_in >= kernel ? (h_in - kernel) / stride + 1 : 0;
  }
  std::uint64_t out_pixels() const { return std::uint64_t(w_out()) * h_out(); }

  std::vector<std::string> check() const {
    std::vector<std::string> v;
    if (c_in == 0) v.push_back(name + ": c_in must be > 0");
    if (c_out == 0) v.push_back(name + ": c_out must be > 0");
    if (kernel == 0) v.push_back(name + ": kernel must be > 0");
    if (stride == 0) v.push_back(name + ": stride must be > 0");
    if (w_in == 0 || h_in == 0) v.push_back(name + ": spatial dims must be > 0");
    else if (w_out() < 1 || h_out() < 1) v.push_back(name + ": output spatial extent is empty");
    return v;
  }
  bool operator==(const LayerDescriptor&) const = default;
};

/// Decomposition of a layer's spatial extent into L1-sized, double-buffered
/// tiles along the flattened output-pixel sequence.
struct TilePlan {
  std::uint32_t w_tile = 0;        // output pixels per tile
  std::uint64_t n_tiles = 0;
  std::uint64_t in_tile_bytes = 0;
  std::uint64_t out_tile_bytes = 0;
  bool double_buffered = true;
  bool operator==(const TilePlan&) const = default;
};

/// Crossbar tiles needed to hold the layer's parameters:
/// ceil(c_in * k^2 / rows) * ceil(c_out / cols).
inline std::uint64_t tiles_required(const LayerDescriptor& layer, std::uint32_t rows,
                                    std::uint32_t cols) {
  const std::uint64_t in_len = std::uint64_t(layer.c_in) * layer.kernel * layer.kernel;
  return ceil_div(in_len, std::uint64_t(rows)) * ceil_div(std::uint64_t(layer.c_out), std::uint64_t(cols));
}

namespace detail {
inline std::uint64_t in_tile_footprint(const LayerDescriptor& l, std::uint64_t w_px) {
  // Input columns covered by w_px output pixels, including the k-1 halo along
  // the tiled dimension.
  const std::uint64_t cols = (w_px - 1) * l.stride + l.kernel;
  return cols * l.c_in * l.bytes_per_elem;
}
inline std::uint64_t out_tile_footprint(const LayerDescriptor& l, std::uint64_t w_px) {
  return w_px * l.c_out * l.bytes_per_elem;
}
}  // namespace detail

/// Largest double-buffered tile that fits the L1 budget after the runtime
/// reserve. For 1x1 layers this is floor((l1 - reserve) / (2*(c_in+c_out))).
inline TilePlan build_tile_plan(const LayerDescriptor& layer, std::uint64_t l1_bytes,
                                std::uint64_t runtime_reserve) {
  if (runtime_reserve >= l1_bytes) throw ConfigError("runtime reserve exceeds L1 capacity");
  const std::uint64_t budget = l1_bytes - runtime_reserve;
  const std::uint64_t single = 2 * (detail::in_tile_footprint(layer, 1) +
                                    detail::out_tile_footprint(layer, 1));
  if (single > budget) {
    throw ConfigError("layer " + layer.name + " is untileable: one pixel needs " +
                      std::to_string(single) + " bytes with double buffering");
  }
  // w_tile depends only on the buffer budget; the last tile may be partial.
  const std::uint64_t per_px =
      2 * (std::uint64_t(layer.stride) * layer.c_in + layer.c_out) * layer.bytes_per_elem;
  std::uint64_t lo = 1, hi = budget / std::max<std::uint64_t>(per_px, 1) + layer.kernel + 1;
  while (lo < hi) {
    const std::uint64_t mid = (lo + hi + 1) / 2;
    const std::uint64_t need = 2 * (detail::in_tile_footprint(layer, mid) +
                                    detail::out_tile_footprint(layer, mid));
    if (need <= budget) lo = mid; else hi = mid - 1;
  }
  TilePlan plan;
  plan.w_tile = static_cast<std::uint32_t>(lo);
  plan.n_tiles = ceil_div(std::max<std::uint64_t>(layer.out_pixels(), 1), lo);
  plan.in_tile_bytes = detail::in_tile_footprint(layer, lo);
  plan.out_tile_bytes = detail::out_tile_footprint(layer, lo);
  plan.double_buffered = true;
  return plan;
}

/// One crossbar evaluation: stream c_in values in, evaluate, stream c_out out.
struct ImaJob {
  std::uint32_t c_in = 0;
  std::uint32_t c_out = 0;
  std::uint32_t weight_tile = 0;   // sub-matrix index within the layer
  bool needs_reprogram = false;
};

/// Per-pixel job template: ceil(c_in*k^2/rows) x ceil(c_out/cols) jobs, with
/// true residual dimensions on the edge jobs. Input chunks of the same output
/// chunk are accumulated by the cluster.
inline std::vector<ImaJob> jobs_per_pixel(const LayerDescriptor& layer, const ImaConfig& ima,
                                          std::uint32_t c_out_width = 0) {
  const std::uint32_t cout = c_out_width == 0 ? layer.c_out : c_out_width;
  const std::uint64_t in_len = std::uint64_t(layer.c_in) * layer.kernel * layer.kernel;
  std::vector<ImaJob> jobs;
  std::uint32_t tile = 0;
  for (std::uint64_t oc = 0; oc < cout; oc += ima.cols) {
    const std::uint32_t oc_w = static_cast<std::uint32_t>(std::min<std::uint64_t>(ima.cols, cout - oc));
    for (std::uint64_t icb = 0; icb < in_len; icb += ima.rows) {
      const std::uint32_t ic_w = static_cast<std::uint32_t>(std::min<std::uint64_t>(ima.rows, in_len - icb));
      jobs.push_back({ic_w, oc_w, tile++, false});
    }
  }
  return jobs;
}

/// Ordered job sequence for `tile_pixels` pixels of a tile. Jobs sharing a
/// weight sub-matrix keep needs_reprogram = false after the first use.
inline std::vector<ImaJob> ima_job_decompose(std::uint64_t tile_pixels,
                                             const LayerDescriptor& layer, const ImaConfig& ima,
                                             std::uint32_t c_out_width = 0) {
  const auto tmpl = jobs_per_pixel(layer, ima, c_out_width);
  std::vector<ImaJob> seq;
  seq.reserve(tmpl.size() * tile_pixels);
  std::vector<bool> programmed(tmpl.size(), false);
  for (std::uint64_t p = 0; p < tile_pixels; ++p) {
    for (const auto& j : tmpl) {
      ImaJob job = j;
      job.needs_reprogram = !programmed[job.weight_tile];
      programmed[job.weight_tile] = true;
      seq.push_back(job);
    }
  }
  return seq;
}

enum class Strategy : std::uint8_t { pipelining, data_parallel };
inline const char* to_string(Strategy s) {
  return s == Strategy::pipelining ? "pipelining" : "data_parallel";
}

/// One slice of a layer placed on a cluster. Slices sharing a weight-tile id
/// on the same cluster are serialized via serialized_after.
struct Assignment {
  std::uint32_t layer_id = 0;
  std::uint32_t c_in_begin = 0, c_in_end = 0;
  std::uint32_t c_out_begin = 0, c_out_end = 0;
  std::uint32_t weight_tile_id = 0;
  std::optional<std::uint32_t> serialized_after;  // index into the cluster's list
  std::uint32_t c_out_width() const { return c_out_end - c_out_begin; }
  bool operator==(const Assignment&) const = default;
};

/// Dataflow edge for one layer boundary. -1 stands for L2.
struct DataflowEdge {
  std::uint32_t layer_id = 0;
  int producer = -1;
  int consumer = -1;
  bool operator==(const DataflowEdge&) const = default;
};

struct MappingPlan {
  Strategy strategy = Strategy::pipelining;
  std::vector<std::vector<Assignment>> per_cluster;  // size == n_clusters
  std::vector<DataflowEdge> edges;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["strategy"] = to_string(strategy);
    nlohmann::json clusters = nlohmann::json::array();
    for (const auto& asgs : per_cluster) {
      nlohmann::json list = nlohmann::json::array();
      for (const auto& a : asgs) {
        nlohmann::json e;
        e["layer_id"] = a.layer_id;
        e["c_in"] = {a.c_in_begin, a.c_in_end};
        e["c_out"] = {a.c_out_begin, a.c_out_end};
        e["weight_tile_id"] = a.weight_tile_id;
        if (a.serialized_after) e["serialized_after"] = *a.serialized_after;
        list.push_back(e);
      }
      clusters.push_back(list);
    }
    j["clusters"] = clusters;
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : this->edges) {
      edges.push_back({{"layer_id", e.layer_id}, {"producer", e.producer}, {"consumer", e.consumer}});
    }
    j["edges"] = edges;
    return j;
  }
};

/// Balanced partition of `total` into `parts` contiguous slice widths that
/// differ by at most one, larger slices first. Zero widths are allowed when
/// parts > total.
inline std::vector<std::uint32_t> balanced_split(std::uint32_t total, std::uint32_t parts) {
  std::vector<std::uint32_t> sizes(parts, total / parts);
  for (std::uint32_t i = 0; i < total % parts; ++i) ++sizes[i];
  return sizes;
}

/// Chains layers across clusters in order. Layers are grouped into contiguous
/// balanced blocks (surplus layers co-locate on the last clusters, linked by
/// serialized_after); the first stage reads L2 and the last writes it back.
inline MappingPlan map_pipelining(const std::vector<LayerDescriptor>& layers, std::uint32_t n_cl) {
  if (n_cl < 1) throw ConfigError("map_pipelining requires n_cl >= 1");
  if (layers.empty()) throw ConfigError("map_pipelining requires at least one layer");
  MappingPlan plan;
  plan.strategy = Strategy::pipelining;
  plan.per_cluster.resize(n_cl);

  const std::uint32_t n_layers = static_cast<std::uint32_t>(layers.size());
  const std::uint32_t stages = std::min(n_cl, n_layers);
  // Group sizes differ by at most one; the larger groups sit at the end so
  // surplus layers land on the last stage.
  std::vector<std::uint32_t> group(stages, n_layers / stages);
  for (std::uint32_t i = 0; i < n_layers % stages; ++i) ++group[stages - 1 - i];

  std::uint32_t layer_id = 0;
  std::vector<std::uint32_t> stage_cluster(stages);
  for (std::uint32_t s = 0; s < stages; ++s) {
    stage_cluster[s] = s;
    for (std::uint32_t g = 0; g < group[s]; ++g) {
      Assignment a;
      a.layer_id = layer_id++;
      a.c_in_begin = 0;
      a.c_in_end = layers[a.layer_id].c_in;
      a.c_out_begin = 0;
      a.c_out_end = layers[a.layer_id].c_out;
      a.weight_tile_id = s;  // one physical crossbar per cluster
      if (g > 0) a.serialized_after = g - 1;
      plan.per_cluster[s].push_back(a);
    }
  }

  plan.edges.push_back({0, -1, static_cast<int>(stage_cluster.front())});
  for (std::uint32_t s = 0; s + 1 < stages; ++s) {
    const auto& last_in_stage = plan.per_cluster[s].back();
    plan.edges.push_back({last_in_stage.layer_id, static_cast<int>(s), static_cast<int>(s + 1)});
  }
  plan.edges.push_back({n_layers - 1, static_cast<int>(stages - 1), -1});
  return plan;
}

/// Splits one layer's output channels into per-cluster slices; every cluster
/// reads the same input tiles from L2 (broadcast-eligible) and writes its
/// disjoint output slice back.
inline MappingPlan map_data_parallel(const LayerDescriptor& layer, std::uint32_t n_cl) {
  if (n_cl < 1) throw ConfigError("map_data_parallel requires n_cl >= 1");
  MappingPlan plan;
  plan.strategy = Strategy::data_parallel;
  plan.per_cluster.resize(n_cl);
  const auto sizes = balanced_split(layer.c_out, n_cl);
  std::uint32_t begin = 0;
  for (std::uint32_t c = 0; c < n_cl; ++c) {
    if (sizes[c] == 0) continue;  // more clusters than output channels
    Assignment a;
    a.layer_id = 0;
    a.c_in_begin = 0;
    a.c_in_end = layer.c_in;
    a.c_out_begin = begin;
    a.c_out_end = begin + sizes[c];
    a.weight_tile_id = c;
    begin += sizes[c];
    plan.per_cluster[c].push_back(a);
    plan.edges.push_back({0, -1, static_cast<int>(c)});
    plan.edges.push_back({0, static_cast<int>(c), -1});
  }
  return plan;
}

struct StageTiming {
  std::vector<Cycle> stage_cycles;   // one entry per cluster with work
  std::uint32_t critical_stage = 0;  // index into stage_cycles
  Cycle initiation_interval = 0;
};

/// Steady-state stage times from contention-free per-layer timings: a stage's
/// time is the sum of its serialized layers' times; the slowest stage sets
/// the initiation interval.
inline StageTiming pipeline_stage_cycles(const MappingPlan& plan,
                                         const std::vector<Cycle>& per_layer_cycles) {
  StageTiming t;
  for (const auto& asgs : plan.per_cluster) {
    if (asgs.empty()) continue;
    Cycle sum = 0;
    for (const auto& a : asgs) sum += per_layer_cycles.at(a.layer_id);
    t.stage_cycles.push_back(sum);
  }
  if (t.stage_cycles.empty()) return t;
  const auto it = std::max_element(t.stage_cycles.begin(), t.stage_cycles.end());
  t.critical_stage = static_cast<std::uint32_t>(it - t.stage_cycles.begin());
  t.initiation_interval = *it;
  return t;
}

/// Layer-table format: one layer per line, `name c_in c_out k w_in h_in
/// stride`, whitespace or comma separated, '#' starts a comment.
inline std::vector<LayerDescriptor> parse_layer_table(std::string_view text) {
  std::vector<LayerDescriptor> layers;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    for (auto& ch : line) {
      if (ch == ',') ch = ' ';
    }
    std::istringstream ls(line);
    LayerDescriptor l;
    if (!(ls >> l.name)) continue;  // blank line
    std::uint64_t vals[6];
    for (int i = 0; i < 6; ++i) {
      if (!(ls >> vals[i])) {
        throw ConfigError("layer table line " + std::to_string(lineno) +
                          ": expected `name c_in c_out k w_in h_in stride`");
      }
    }
    l.c_in = static_cast<std::uint32_t>(vals[0]);
    l.c_out = static_cast<std::uint32_t>(vals[1]);
    l.kernel = static_cast<std::uint32_t>(vals[2]);
    l.w_in = static_cast<std::uint32_t>(vals[3]);
    l.h_in = static_cast<std::uint32_t>(vals[4]);
    l.stride = static_cast<std::uint32_t>(vals[5]);
    auto bad = l.check();
    if (!bad.empty()) {
      throw ConfigError("layer table line " + std::to_string(lineno) + ": " + bad.front());
    }
    layers.push_back(std::move(l));
  }
  return layers;
}

}  // namespace aimcsim
