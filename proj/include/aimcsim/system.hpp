#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aimcsim/arch.hpp"
#include "aimcsim/cluster.hpp"
#include "aimcsim/engine.hpp"
#include "aimcsim/interconnect.hpp"
#include "aimcsim/types.hpp"
#include "aimcsim/workload.hpp"

namespace aimcsim {

struct SimOptions {
  std::uint64_t max_events = 100'000'000;
};

struct RunStats {
  Cycle tot_exec_cycles = 0;
  std::uint64_t total_macs = 0;
  std::uint64_t iterations = 0;  // output pixels per stage

  Cycle link_busy_cycles = 0;
  Cycle pair_link_busy_cycles = 0;
  std::vector<Cycle> link_requester_wait;  // per cluster (+ one broadcast slot)
  std::uint64_t l1_conflicts = 0;
  std::uint64_t l2_conflicts = 0;
  std::uint64_t l2_read_bytes = 0;
  std::uint64_t l2_write_bytes = 0;
  std::uint64_t broadcast_saved_bytes = 0;

  std::vector<Cycle> input_wait_cycles;  // per cluster
  std::vector<Cycle> ima_busy;           // per cluster
  std::vector<Cycle> dma_busy;           // per cluster, summed over channels
  std::uint32_t dma_channels = 0;

  Timeline timeline;
  std::vector<std::string> resource_names;
};

/// Full-system simulation of one MappingPlan over one layer set.
///
/// Data moves at pixel granularity: L2 input fetches are tile-sized DMA
/// transfers whose pixels become consumable as their bytes are deposited,
/// inter-cluster pipeline forwarding and L2 write-back are per-pixel
/// transfers overlapped with compute, and the in-cluster pipeline is the
/// usual double-buffered arrangement (input tiles, output slots, DMA
/// alongside the accelerator).
class SystemSim {
 public:
  SystemSim(const ValidatedArch& arch, MappingPlan plan, std::vector<LayerDescriptor> layers,
            SimOptions opt = {})
      : arch_(arch), plan_(std::move(plan)), layers_(std::move(layers)), opt_(opt) {
    build();
  }

  RunStats run() {
    if (ran_) throw SimError("SystemSim::run may only be called once");
    ran_ = true;
    eng_.set_max_events(opt_.max_events);
    for (auto& st : stages_) {
      Stage* s = st.get();
      eng_.schedule(0, s->core_res, [this, s] { feeder(*s); });
      if (s->producer < 0 && !s->broadcast_fed) {
        eng_.schedule(0, s->core_res, [this, s] { try_fetch(*s); });
      }
    }
    if (bcast_.active) {
      eng_.schedule(0, [this] { try_broadcast(); });
    }
    const Cycle end = eng_.run_until_idle();
    check_completion();
    return gather(end);
  }

 private:
  // ---- static plan data -------------------------------------------------

  struct ChainItem {
    Assignment asg;
    LayerDescriptor local;  // layer restricted to this cluster's c_out slice
    std::vector<ImaJob> jobs_pp;
    std::uint64_t out_bytes_pp = 0;
  };

  enum class Block : std::uint8_t { none, input, credit };

  struct Stage {
    std::uint32_t cluster = 0;
    ResourceId core_res = 0;
    ResourceId ima_res = 0;
    std::vector<ChainItem> chain;
    std::uint64_t pixels = 0;
    TilePlan tile;
    std::uint32_t w_tile = 0;
    std::uint64_t n_tiles = 0;
    int producer = -1;  // -1 = L2
    int consumer = -1;
    bool broadcast_fed = false;

    // hardware
    std::unique_ptr<L1Arbiter> arb;
    std::uint32_t ima_slot = 0;
    std::uint32_t rx_slot = 0;
    std::unique_ptr<ImaUnit> ima;
    std::unique_ptr<EventUnit> events;
    std::unique_ptr<DmaEngine> dma;
    std::unique_ptr<RxPump> rx;

    // feeder cursor
    std::uint64_t tile_i = 0;
    std::uint32_t chain_i = 0;
    std::uint64_t px_i = 0;
    std::uint32_t job_i = 0;
    bool tile_fee_paid = false;

    // blocking
    Block blocked = Block::none;
    std::uint64_t blocked_pixel = 0;
    Cycle blocked_since = 0;

    // credits and progress
    std::int64_t out_credits = 0;
    std::int64_t fwd_credits = -1;  // slots in the consumer's input buffer
    std::vector<std::uint8_t> in_ready;
    std::uint64_t consumed_px = 0;
    std::uint64_t completed_px = 0;
    std::uint64_t next_fetch_tile = 0;
    std::deque<std::uint64_t> drain_q;

    // L2 stream cursors
    std::uint64_t l2_in_base = 0;
    std::uint64_t l2_in_cursor = 0;
    std::uint64_t l2_out_base = 0;
    std::uint64_t l2_out_cursor = 0;

    // weight-programming state: one crossbar per cluster, so switching chain
    // items invalidates the other item's programmed tiles
    int cur_item = -1;
    std::vector<std::vector<std::uint8_t>> programmed;

    Cycle input_wait = 0;

    std::uint64_t tile_pixels(std::uint64_t t) const {
      const std::uint64_t begin = t * w_tile;
      return std::min<std::uint64_t>(w_tile, pixels - begin);
    }
  };

  struct BroadcastState {
    bool active = false;
    std::uint32_t w_tile = 0;
    std::uint64_t n_tiles = 0;
    std::uint64_t next_tile = 0;
    std::uint32_t inflight = 0;
    std::uint64_t cursor = 0;
    std::vector<Stage*> members;
    LayerDescriptor feed_layer;  // input geometry shared by all members
  };

  // ---- construction ------------------------------------------------------

  void build() {
    const std::uint32_t n_cl = arch_.n_clusters();
    if (plan_.per_cluster.size() > n_cl) {
      throw SimError("mapping plan uses more clusters than the configuration provides");
    }
    plan_.per_cluster.resize(n_cl);

    pool_ = std::make_unique<SharedLink>(
        eng_, "link", arch_.interconnect().bandwidth_bits_per_cycle,
        arch_.interconnect().latency_cycles,
        arch_.interconnect().kind == LinkKind::wireless, arch_.interconnect().accounting,
        n_cl + 1, &l2_storage());

    for (std::uint32_t c = 0; c < n_cl; ++c) {
      if (plan_.per_cluster[c].empty()) continue;
      auto st = std::make_unique<Stage>();
      Stage& s = *st;
      s.cluster = c;
      const std::string name = "cl" + std::to_string(c);
      s.core_res = eng_.add_resource(name + ".core");
      s.ima_res = eng_.add_resource(name + ".ima");
      s.arb = std::make_unique<L1Arbiter>(eng_, arch_.cluster().l1_banks);
      s.ima_slot = s.arb->add_requester(L1Arbiter::Class::ima);
      s.events = std::make_unique<EventUnit>(eng_, arch_.event_latency());
      s.dma = std::make_unique<DmaEngine>(eng_, name, arch_.cluster().dma_channels, *s.arb,
                                          *s.events);
      s.rx_slot = s.arb->add_requester(L1Arbiter::Class::dma);
      s.ima = std::make_unique<ImaUnit>(eng_, s.ima_res, arch_, *s.arb, s.ima_slot);

      for (const auto& a : plan_.per_cluster[c]) {
        if (a.layer_id >= layers_.size()) throw SimError("assignment references unknown layer");
        const LayerDescriptor& full = layers_[a.layer_id];
        if (a.c_out_end > full.c_out || a.c_out_begin >= a.c_out_end) {
          throw SimError("assignment output slice out of range");
        }
        ChainItem ci;
        ci.asg = a;
        ci.local = full;
        ci.local.c_out = a.c_out_width();
        ci.jobs_pp = jobs_per_pixel(ci.local, arch_.ima());
        ci.out_bytes_pp = std::uint64_t(ci.local.c_out) * ci.local.bytes_per_elem;
        s.chain.push_back(std::move(ci));
      }
      s.pixels = s.chain.front().local.out_pixels();
      for (const auto& ci : s.chain) {
        if (ci.local.out_pixels() != s.pixels) {
          throw SimError("co-located layers must share the same output pixel count");
        }
      }
      for (std::size_t i = 1; i < s.chain.size(); ++i) {
        if (s.chain[i].local.c_in != s.chain[i - 1].local.c_out) {
          throw SimError("serialized chain has mismatched channel widths");
        }
        if (!s.chain[i].asg.serialized_after) {
          throw SimError("co-located assignments must be linked by serialized_after");
        }
      }
      s.tile = build_tile_plan(s.chain.front().local, arch_.cluster().l1_bytes,
                               arch_.cluster().runtime_reserve_bytes);
      s.w_tile = s.tile.w_tile;
      s.n_tiles = s.tile.n_tiles;
      s.in_ready.assign(s.pixels, 0);
      s.out_credits = 2ll * s.w_tile;
      s.programmed.resize(s.chain.size());
      for (std::size_t i = 0; i < s.chain.size(); ++i) {
        s.programmed[i].assign(s.chain[i].jobs_pp.size(), 0);
      }
      stage_of_cluster_[c] = stages_.size();
      stages_.push_back(std::move(st));
    }
    if (stages_.empty()) throw SimError("mapping plan assigns no work");

    // Wire dataflow edges.
    for (const auto& e : plan_.edges) {
      if (e.producer >= 0 && e.consumer >= 0) {
        Stage& prod = stage(e.producer);
        Stage& cons = stage(e.consumer);
        if (prod.consumer != -1 || cons.producer != -1) {
          throw SimError("a cluster may have at most one upstream and one downstream edge");
        }
        prod.consumer = e.consumer;
        cons.producer = e.producer;
      }
    }
    for (auto& stp : stages_) {
      Stage& s = *stp;
      if (s.producer >= 0) {
        Stage& prod = stage(s.producer);
        if (prod.pixels != s.pixels) {
          throw SimError("pipeline stages with mismatched pixel counts are not supported");
        }
        if (prod.chain.back().local.c_out != s.chain.front().local.c_in) {
          throw SimError("pipeline edge has mismatched channel widths");
        }
      }
    }
    for (auto& stp : stages_) {
      Stage& s = *stp;
      if (s.consumer >= 0) s.fwd_credits = 2ll * stage(s.consumer).w_tile;
    }

    // L2 address layout: one shared input region, then per-cluster output
    // streams. Streams wrap modulo capacity inside the bank model.
    std::uint64_t base = 0;
    for (auto& stp : stages_) {
      Stage& s = *stp;
      if (s.producer < 0) {
        s.l2_in_base = 0;
        s.l2_in_cursor = 0;
        base = std::max(base, detail::in_tile_footprint(s.chain.front().local, 1) * s.pixels);
      }
    }
    const std::uint64_t word = arch_.l2().bank_word_bytes;
    const std::uint64_t banks = arch_.l2().banks;
    std::uint32_t writer_ordinal = 0;
    for (auto& stp : stages_) {
      Stage& s = *stp;
      if (s.consumer < 0) {
        // Round up to a word and stagger start banks so concurrent write
        // streams interleave across the L2 banks.
        base = ceil_div(base, word) * word;
        const std::uint64_t have = (base / word) % banks;
        const std::uint64_t want = writer_ordinal++ % banks;
        base += ((want + banks - have) % banks) * word;
        s.l2_out_base = base;
        s.l2_out_cursor = base;
        base += s.chain.back().out_bytes_pp * s.pixels;
      }
    }

    // Broadcast grouping: data-parallel input fetches of identical tiles.
    if (plan_.strategy == Strategy::data_parallel && arch_.interconnect().broadcast_enabled) {
      bcast_.active = true;
      std::uint32_t min_w = ~0u;
      for (auto& stp : stages_) {
        Stage& s = *stp;
        if (s.producer >= 0) { bcast_.active = false; break; }
        s.broadcast_fed = true;
        bcast_.members.push_back(&s);
        min_w = std::min(min_w, s.w_tile);
      }
      if (bcast_.active) {
        bcast_.w_tile = min_w;
        bcast_.n_tiles = ceil_div(bcast_.members.front()->pixels, std::uint64_t(min_w));
        bcast_.feed_layer = bcast_.members.front()->chain.front().local;
        for (Stage* m : bcast_.members) {
          if (m->chain.front().local.c_in != bcast_.feed_layer.c_in ||
              m->pixels != bcast_.members.front()->pixels) {
            throw SimError("broadcast members must consume identical input streams");
          }
        }
      } else {
        for (auto& stp : stages_) stp->broadcast_fed = false;
      }
    }

    for (auto& stp : stages_) {
      Stage& s = *stp;
      const std::string name = "cl" + std::to_string(s.cluster);
      s.rx = std::make_unique<RxPump>(eng_, *s.arb, s.rx_slot, /*base=*/0);
      (void)name;
    }
  }

  L2Banks& l2_storage() {
    if (!l2_) {
      l2_ = std::make_unique<L2Banks>(arch_.l2().banks, arch_.l2().bank_word_bytes,
                                      arch_.l2().capacity_bytes);
    }
    return *l2_;
  }

  Stage& stage(int cluster) {
    auto it = stage_of_cluster_.find(static_cast<std::uint32_t>(cluster));
    if (it == stage_of_cluster_.end()) throw SimError("dataflow edge references an idle cluster");
    return *stages_[it->second];
  }

  SharedLink& pair_link(std::uint32_t src, std::uint32_t dst) {
    const auto key = std::make_pair(src, dst);
    auto it = pair_links_.find(key);
    if (it == pair_links_.end()) {
      auto link = std::make_unique<SharedLink>(
          eng_, "link.cl" + std::to_string(src) + "-cl" + std::to_string(dst),
          arch_.interconnect().bandwidth_bits_per_cycle, arch_.interconnect().latency_cycles,
          arch_.interconnect().kind == LinkKind::wireless, LinkAccounting::aggregate_shared,
          /*n_requesters=*/1, nullptr);
      it = pair_links_.emplace(key, std::move(link)).first;
    }
    return *it->second;
  }

  // ---- input feeds --------------------------------------------------------

  static std::vector<std::uint64_t> pixel_marks(const LayerDescriptor& l,
                                                std::uint64_t tile_px) {
    const std::uint64_t total = detail::in_tile_footprint(l, tile_px);
    std::vector<std::uint64_t> marks(tile_px);
    for (std::uint64_t j = 0; j < tile_px; ++j) marks[j] = total * (j + 1) / tile_px;
    return marks;
  }

  void try_fetch(Stage& s) {
    while (s.next_fetch_tile < s.n_tiles &&
           s.next_fetch_tile <= s.consumed_px / s.w_tile + 1) {
      const std::uint64_t t = s.next_fetch_tile++;
      const std::uint64_t tile_px = s.tile_pixels(t);
      const auto marks = pixel_marks(s.chain.front().local, tile_px);
      DmaEngine::Descriptor d;
      d.direction = DmaEngine::Descriptor::Dir::l2_to_l1;
      d.bytes = marks.back();
      d.src_cluster = -1;
      d.dst_cluster = static_cast<int>(s.cluster);
      d.l2_addr = s.l2_in_base + s.l2_in_cursor;
      d.local_addr = (t % 2) * s.tile.in_tile_bytes;
      s.l2_in_cursor += marks.back();
      Stage* sp = &s;
      for (std::uint64_t j = 0; j < tile_px; ++j) {
        const std::uint64_t p = t * s.w_tile + j;
        d.markers.emplace_back(marks[j], [this, sp, p](Cycle at) { mark_ready(*sp, p, at); });
      }
      s.dma->submit(std::move(d), *pool_, s.cluster);
    }
  }

  void try_broadcast() {
    while (bcast_.next_tile < bcast_.n_tiles && bcast_.inflight < 2) {
      std::uint64_t min_consumed = ~std::uint64_t{0};
      for (Stage* m : bcast_.members) {
        min_consumed = std::min(min_consumed, m->consumed_px / bcast_.w_tile);
      }
      if (bcast_.next_tile > min_consumed + 1) return;
      const std::uint64_t t = bcast_.next_tile++;
      const std::uint64_t begin = t * bcast_.w_tile;
      const std::uint64_t tile_px =
          std::min<std::uint64_t>(bcast_.w_tile, bcast_.members.front()->pixels - begin);
      const auto marks = pixel_marks(bcast_.feed_layer, tile_px);
      SharedLink::Desc ld;
      ld.requester = arch_.n_clusters();  // the broadcast source slot
      ld.bytes = marks.back();
      ld.broadcast = true;
      ld.fanout = static_cast<std::uint32_t>(bcast_.members.size());
      ld.l2dir = SharedLink::L2Dir::read;
      ld.l2_addr = bcast_.cursor;
      bcast_.cursor += marks.back();
      std::uint64_t prev = 0;
      for (std::uint64_t j = 0; j < tile_px; ++j) {
        const std::uint64_t p = begin + j;
        const std::uint64_t delta = marks[j] - prev;
        prev = marks[j];
        ld.thresholds.emplace_back(marks[j], [this, p, delta](Cycle) {
          for (Stage* m : bcast_.members) {
            Stage* sp = m;
            sp->rx->enqueue(delta, [this, sp, p](Cycle at) { mark_ready(*sp, p, at); });
          }
        });
      }
      ++bcast_.inflight;
      ld.on_complete = [this](Cycle, Cycle) {
        --bcast_.inflight;
        try_broadcast();
      };
      pool_->submit(std::move(ld));
    }
  }

  void mark_ready(Stage& s, std::uint64_t p, Cycle at) {
    s.in_ready[p] = 1;
    if (s.blocked == Block::input && s.blocked_pixel == p) unblock(s, at, /*input=*/true);
  }

  // ---- feeder -------------------------------------------------------------

  void block(Stage& s, Block kind, std::uint64_t pixel) {
    s.blocked = kind;
    s.blocked_pixel = pixel;
    s.blocked_since = eng_.now();
  }

  void unblock(Stage& s, Cycle fire, bool input) {
    const Cycle resume = std::max(fire, s.blocked_since) + arch_.event_latency();
    s.blocked = Block::none;
    Stage* sp = &s;
    const Cycle since = s.blocked_since;
    eng_.schedule(resume, s.core_res, [this, sp, since, resume, input] {
      eng_.note(sp->core_res, Phase::WaitEvent, since, resume);
      if (input) sp->input_wait += resume - since;
      feeder(*sp);
    });
  }

  bool needs_prog(Stage& s, const ImaJob& job) {
    if (s.cur_item != static_cast<int>(s.chain_i)) {
      // The crossbar is reloaded with this layer's tiles; everything the
      // other co-located layers had programmed is gone.
      for (std::size_t i = 0; i < s.programmed.size(); ++i) {
        if (i != s.chain_i) std::fill(s.programmed[i].begin(), s.programmed[i].end(), 0);
      }
      s.cur_item = static_cast<int>(s.chain_i);
    }
    auto& pr = s.programmed[s.chain_i];
    const bool need = !pr[job.weight_tile];
    pr[job.weight_tile] = 1;
    return need;
  }

  void feeder(Stage& s) {
    if (s.blocked != Block::none) return;
    if (s.tile_i == s.n_tiles) return;  // everything issued

    if (!s.tile_fee_paid) {
      s.tile_fee_paid = true;
      const Cycle fee = arch_.cluster().tile_overhead_cycles;
      if (fee > 0) {
        const Cycle t = eng_.now();
        eng_.note(s.core_res, Phase::Prog, t, t + fee);
        Stage* sp = &s;
        eng_.schedule(t + fee, s.core_res, [this, sp] { feeder(*sp); });
        return;
      }
    }

    ChainItem& ci = s.chain[s.chain_i];
    const std::uint64_t p = s.tile_i * s.w_tile + s.px_i;
    const bool last_item = (s.chain_i + 1 == s.chain.size());
    const bool first_job = (s.job_i == 0);

    if (s.chain_i == 0 && !s.in_ready[p]) {
      block(s, Block::input, p);
      return;
    }
    if (last_item && first_job) {
      if (s.out_credits == 0) {
        block(s, Block::credit, p);
        return;
      }
      --s.out_credits;
    }

    const ImaJob& job = ci.jobs_pp[s.job_i];
    ImaUnit::Job jr;
    jr.c_in = job.c_in;
    jr.c_out = job.c_out;
    jr.needs_prog = needs_prog(s, job);
    jr.src_addr = (p % (2ull * s.w_tile)) * s.chain.front().local.c_in;
    jr.dst_addr = s.tile.in_tile_bytes * 2 + (p % (2ull * s.w_tile)) * ci.out_bytes_pp;
    Stage* sp = &s;
    const bool consumes = (s.chain_i == 0 && s.job_i + 1 == ci.jobs_pp.size());
    if (consumes) {
      jr.on_input_consumed = [this, sp, p](Cycle at) { consume_pixel(*sp, p, at); };
    }
    const std::uint64_t macs = std::uint64_t(job.c_in) * job.c_out;
    jr.on_done = [this, sp, p, macs, last_item](Cycle at) {
      total_macs_ += macs;
      advance(*sp, p, last_item, at);
    };
    s.ima->run(std::move(jr));
  }

  void advance(Stage& s, std::uint64_t p, bool last_item, Cycle at) {
    ChainItem& ci = s.chain[s.chain_i];
    ++s.job_i;
    if (s.job_i < ci.jobs_pp.size()) {
      feeder(s);
      return;
    }
    s.job_i = 0;
    if (last_item) {
      ++s.completed_px;
      s.drain_q.push_back(p);
      drain_pump(s);
    }
    ++s.px_i;
    if (s.px_i == s.tile_pixels(s.tile_i)) {
      s.px_i = 0;
      ++s.chain_i;
      if (s.chain_i == s.chain.size()) {
        s.chain_i = 0;
        ++s.tile_i;
        s.tile_fee_paid = false;
      }
    }
    (void)at;
    feeder(s);
  }

  void consume_pixel(Stage& s, std::uint64_t p, Cycle at) {
    ++s.consumed_px;
    if (s.producer >= 0) {
      Stage& prod = stage(s.producer);
      Stage* pp = &prod;
      // Software event back to the producer: its forward credit frees after
      // the event-unit latency.
      eng_.schedule(at + arch_.event_latency(), prod.core_res, [this, pp] {
        ++pp->fwd_credits;
        drain_pump(*pp);
      });
    } else if (s.broadcast_fed) {
      try_broadcast();
    } else {
      try_fetch(s);
    }
    (void)p;
  }

  void drain_pump(Stage& s) {
    while (!s.drain_q.empty()) {
      if (s.consumer >= 0 && s.fwd_credits == 0) return;
      const std::uint64_t p = s.drain_q.front();
      s.drain_q.pop_front();
      const std::uint64_t bytes = s.chain.back().out_bytes_pp;
      DmaEngine::Descriptor d;
      d.bytes = bytes;
      d.local_addr = s.tile.in_tile_bytes * 2 + (p % (2ull * s.w_tile)) * bytes;
      Stage* sp = &s;
      if (s.consumer < 0) {
        d.direction = DmaEngine::Descriptor::Dir::l1_to_l2;
        d.src_cluster = static_cast<int>(s.cluster);
        d.l2_addr = s.l2_out_cursor;
        s.l2_out_cursor += bytes;
        d.on_complete = [this, sp](Cycle at) { return_out_credit(*sp, at); };
        s.dma->submit(std::move(d), *pool_, s.cluster);
      } else {
        --s.fwd_credits;
        Stage& cons = stage(s.consumer);
        Stage* cp = &cons;
        d.direction = DmaEngine::Descriptor::Dir::l1_to_l1_remote;
        d.src_cluster = static_cast<int>(s.cluster);
        d.dst_cluster = s.consumer;
        d.on_complete = [this, sp, cp, p, bytes](Cycle at) {
          return_out_credit(*sp, at);
          cp->rx->enqueue(bytes, [this, cp, p](Cycle cc) { mark_ready(*cp, p, cc); });
        };
        s.dma->submit(std::move(d), pair_link(s.cluster, cons.cluster), 0);
      }
    }
  }

  void return_out_credit(Stage& s, Cycle at) {
    ++s.out_credits;
    if (s.blocked == Block::credit) unblock(s, at, /*input=*/false);
  }

  // ---- wrap-up ------------------------------------------------------------

  void check_completion() {
    std::string stuck;
    for (const auto& stp : stages_) {
      const Stage& s = *stp;
      if (s.completed_px == s.pixels && s.drain_q.empty()) continue;
      stuck += "\n  cl" + std::to_string(s.cluster) + ": completed " +
               std::to_string(s.completed_px) + "/" + std::to_string(s.pixels) +
               ", consumed " + std::to_string(s.consumed_px) +
               (s.blocked == Block::input
                    ? ", blocked waiting for input pixel " + std::to_string(s.blocked_pixel)
                    : s.blocked == Block::credit ? ", blocked waiting for an output slot"
                                                 : "") +
               ", out_credits " + std::to_string(s.out_credits) + ", fwd_credits " +
               std::to_string(s.fwd_credits);
    }
    if (!stuck.empty()) {
      throw SimError("simulation deadlocked; no producer will post the awaited events:" + stuck);
    }
  }

  RunStats gather(Cycle end) {
    RunStats r;
    r.tot_exec_cycles = end;
    r.total_macs = total_macs_;
    r.iterations = stages_.front()->pixels;
    r.link_busy_cycles = pool_->busy_cycles();
    r.link_requester_wait = pool_->requester_wait();
    r.l2_read_bytes = pool_->l2_read_bytes();
    r.l2_write_bytes = pool_->l2_write_bytes();
    r.broadcast_saved_bytes = pool_->broadcast_saved_bytes();
    r.l2_conflicts = l2_ ? l2_->conflicts() : 0;
    for (const auto& [key, link] : pair_links_) r.pair_link_busy_cycles += link->busy_cycles();

    const std::uint32_t n_cl = arch_.n_clusters();
    r.input_wait_cycles.assign(n_cl, 0);
    r.ima_busy.assign(n_cl, 0);
    r.dma_busy.assign(n_cl, 0);
    r.dma_channels = arch_.cluster().dma_channels;
    for (const auto& stp : stages_) {
      const Stage& s = *stp;
      r.input_wait_cycles[s.cluster] = s.input_wait;
      r.ima_busy[s.cluster] = s.ima->busy_cycles();
      r.dma_busy[s.cluster] = s.dma->busy_cycles();
      r.l1_conflicts += s.arb->total_conflicts();
    }
    r.timeline = std::move(eng_.timeline());
    r.resource_names = eng_.resource_names();
    return r;
  }

  const ValidatedArch& arch_;
  MappingPlan plan_;
  std::vector<LayerDescriptor> layers_;
  SimOptions opt_;

  SimEngine eng_;
  std::unique_ptr<L2Banks> l2_;
  std::unique_ptr<SharedLink> pool_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::unique_ptr<SharedLink>> pair_links_;
  std::vector<std::unique_ptr<Stage>> stages_;
  std::map<std::uint32_t, std::size_t> stage_of_cluster_;
  BroadcastState bcast_;
  std::uint64_t total_macs_ = 0;
  bool ran_ = false;
};

}  // namespace aimcsim
