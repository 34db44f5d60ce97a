#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aimcsim/arch.hpp"
#include "aimcsim/engine.hpp"
#include "aimcsim/interconnect.hpp"
#include "aimcsim/types.hpp"

namespace aimcsim {

struct ImaPhaseCycles {
  Cycle stream_in = 0;
  Cycle eval = 0;
  Cycle stream_out = 0;
  Cycle total() const { return stream_in + eval + stream_out; }
  bool operator==(const ImaPhaseCycles&) const = default;
};

/// Contention-free phase minimums: stream phases move the channel vector
/// through the L1 ports, the eval phase is the fixed analog time converted to
/// cycles. The engine adds stalls on top.
inline ImaPhaseCycles ima_phase_cycles(const ImaConfig& ima, std::uint32_t c_in,
                                       std::uint32_t c_out, double f_clock) {
  if (c_in == 0 || c_in > ima.rows) {
    throw SimError("c_in " + std::to_string(c_in) + " exceeds crossbar rows " +
                   std::to_string(ima.rows));
  }
  if (c_out == 0 || c_out > ima.cols) {
    throw SimError("c_out " + std::to_string(c_out) + " exceeds crossbar cols " +
                   std::to_string(ima.cols));
  }
  const std::uint32_t beat = ima.stream_beat_bytes();
  ImaPhaseCycles p;
  p.stream_in = ceil_div<Cycle>(c_in, beat);
  p.eval = cycles_from_ns(ima.t_eval_ns, f_clock);
  p.stream_out = ceil_div<Cycle>(c_out, beat);
  return p;
}

/// Per-bank, per-cycle round-robin arbitration between the cluster's L1
/// requesters (IMA stream ports, DMA channels) with word-interleaved address
/// mapping. A multi-bank access is granted atomically or retried next cycle.
class L1Arbiter {
 public:
  static constexpr std::uint32_t kWordBytes = 4;

  L1Arbiter(SimEngine& eng, std::uint32_t banks) : eng_(eng), banks_(banks) {}

  std::uint32_t stripe_bytes() const { return banks_ * kWordBytes; }

  enum class Class : std::uint8_t { ima, dma };

  std::uint32_t add_requester(Class cls) {
    slots_.push_back(Slot{});
    slots_.back().cls = cls;
    return static_cast<std::uint32_t>(slots_.size() - 1);
  }

  std::uint64_t bank_mask(std::uint64_t addr, std::uint32_t bytes) const {
    std::uint64_t mask = 0;
    const std::uint64_t first_word = addr / kWordBytes;
    const std::uint64_t last_word = (addr + bytes - 1) / kWordBytes;
    if (last_word - first_word + 1 >= banks_) return (banks_ >= 64) ? ~0ull : (1ull << banks_) - 1;
    for (std::uint64_t w = first_word; w <= last_word; ++w) mask |= 1ull << (w % banks_);
    return mask;
  }

  /// Queues a request; on_grant runs in the cycle the banks are won.
  void request(std::uint32_t slot, std::uint64_t addr, std::uint32_t bytes,
               std::function<void()> on_grant) {
    Slot& s = slots_.at(slot);
    if (s.pending) throw SimError("l1 requester already has a pending request");
    s.pending = true;
    s.mask = bank_mask(addr, bytes);
    s.bytes = bytes;
    s.on_grant = std::move(on_grant);
    if (!tick_scheduled_) {
      tick_scheduled_ = true;
      // Never arbitrate twice in one cycle: a request arriving after this
      // cycle's tick waits for the next one.
      const Cycle when = (last_tick_ == eng_.now()) ? eng_.now() + 1 : eng_.now();
      eng_.schedule(when, [this] { tick(); });
    }
  }

  std::uint64_t conflicts(Class cls) const {
    std::uint64_t sum = 0;
    for (const auto& s : slots_) {
      if (s.cls == cls) sum += s.conflicts;
    }
    return sum;
  }
  std::uint64_t total_conflicts() const {
    return conflicts(Class::ima) + conflicts(Class::dma);
  }
  std::uint64_t granted_bytes() const {
    std::uint64_t sum = 0;
    for (const auto& s : slots_) sum += s.granted_bytes;
    return sum;
  }
  std::uint64_t granted_bytes(std::uint32_t slot) const { return slots_.at(slot).granted_bytes; }

 private:
  struct Slot {
    Class cls = Class::dma;
    bool pending = false;
    std::uint64_t mask = 0;
    std::uint32_t bytes = 0;
    std::function<void()> on_grant;
    std::uint64_t conflicts = 0;
    std::uint64_t granted_bytes = 0;
  };

  void tick() {
    const Cycle c = eng_.now();
    last_tick_ = c;
    std::uint64_t used = 0;
    const std::size_t n = slots_.size();
    std::vector<std::function<void()>> grants;
    bool still_pending = false;
    for (std::size_t i = 0; i < n; ++i) {
      Slot& s = slots_[(rr_ + i) % n];
      if (!s.pending) continue;
      if ((s.mask & used) == 0) {
        used |= s.mask;
        s.pending = false;
        s.granted_bytes += s.bytes;
        grants.push_back(std::move(s.on_grant));
      } else {
        ++s.conflicts;
        still_pending = true;
      }
    }
    ++rr_;
    for (auto& g : grants) g();
    // Grant callbacks may have queued fresh requests for this same cycle;
    // those wait for the next tick.
    for (const auto& s : slots_) still_pending = still_pending || s.pending;
    if (still_pending) {
      eng_.schedule(c + 1, [this] { tick(); });
    } else {
      tick_scheduled_ = false;
    }
  }

  SimEngine& eng_;
  std::uint32_t banks_;
  std::vector<Slot> slots_;
  std::uint64_t rr_ = 0;
  bool tick_scheduled_ = false;
  Cycle last_tick_ = ~Cycle{0};
};

/// Synchronization unit: collects hardware/software events and resumes
/// waiters event_latency_cycles after the last event of their mask fires.
/// Already-fired events satisfy a wait immediately (still paying the
/// delivery latency).
class EventUnit {
 public:
  using EventId = std::uint64_t;

  EventUnit(SimEngine& eng, Cycle latency) : eng_(eng), latency_(latency) {}

  void post(EventId id) {
    const Cycle t = eng_.now();
    fired_.emplace(id, t);
    for (auto& w : waiters_) {
      if (w.done) continue;
      std::erase(w.remaining, id);
      if (w.remaining.empty()) {
        w.done = true;
        auto fn = w.fn;
        const Cycle resume = t + latency_;
        eng_.schedule(resume, [fn, resume] { fn(resume); });
      }
    }
    std::erase_if(waiters_, [](const Waiter& w) { return w.done; });
  }

  bool fired(EventId id) const { return fired_.count(id) != 0; }
  std::optional<Cycle> fired_at(EventId id) const {
    auto it = fired_.find(id);
    if (it == fired_.end()) return std::nullopt;
    return it->second;
  }

  void wait(std::vector<EventId> mask, std::function<void(Cycle)> fn) {
    Waiter w;
    for (EventId id : mask) {
      if (!fired_.count(id)) w.remaining.push_back(id);
    }
    if (w.remaining.empty()) {
      const Cycle resume = eng_.now() + latency_;
      eng_.schedule(resume, [fn, resume] { fn(resume); });
      return;
    }
    w.fn = std::move(fn);
    waiters_.push_back(std::move(w));
  }

  /// Masks still blocked, for deadlock diagnostics.
  std::vector<std::vector<EventId>> blocked_masks() const {
    std::vector<std::vector<EventId>> out;
    for (const auto& w : waiters_) {
      if (!w.done) out.push_back(w.remaining);
    }
    return out;
  }

 private:
  struct Waiter {
    std::vector<EventId> remaining;
    std::function<void(Cycle)> fn;
    bool done = false;
  };

  SimEngine& eng_;
  Cycle latency_;
  std::map<EventId, Cycle> fired_;
  std::vector<Waiter> waiters_;
};

/// The crossbar accelerator. One job at a time: optional context programming,
/// then stream-in / eval / stream-out. Stream beats go through the L1
/// arbiter; stall cycles surface as conflict-stall timeline entries. The eval
/// phase generates no L1 traffic.
class ImaUnit {
 public:
  struct Job {
    std::uint32_t c_in = 0;
    std::uint32_t c_out = 0;
    bool needs_prog = false;
    std::uint64_t src_addr = 0;
    std::uint64_t dst_addr = 0;
    std::function<void(Cycle)> on_input_consumed;  // stream-in complete
    std::function<void(Cycle)> on_done;
  };

  ImaUnit(SimEngine& eng, ResourceId resource, const ValidatedArch& arch, L1Arbiter& arb,
          std::uint32_t arb_slot)
      : eng_(eng), res_(resource), arch_(arch), arb_(arb), slot_(arb_slot) {}

  bool busy() const { return busy_; }
  Cycle busy_cycles() const { return busy_cycles_; }
  Cycle conflict_stall_cycles() const { return stall_cycles_; }

  void run(Job job) {
    if (busy_) throw SimError("ima job launched while the accelerator is busy");
    busy_ = true;
    job_ = std::move(job);
    phases_ = ima_phase_cycles(arch_.ima(), job_.c_in, job_.c_out, arch_.f_clock());
    job_start_ = eng_.now();
    if (job_.needs_prog) {
      const Cycle p = arch_.cluster().prog_overhead_cycles;
      if (p > 0) {
        eng_.note(res_, Phase::Prog, job_start_, job_start_ + p);
        eng_.schedule(job_start_ + p, res_, [this] { start_stream(true); });
        return;
      }
    }
    start_stream(true);
  }

 private:
  void start_stream(bool inbound) {
    inbound_ = inbound;
    beats_left_ = static_cast<std::uint32_t>(inbound ? phases_.stream_in : phases_.stream_out);
    const std::uint32_t total = inbound ? job_.c_in : job_.c_out;
    beat_bytes_ = arch_.ima().stream_beat_bytes();
    bytes_left_ = total;
    cursor_ = inbound ? job_.src_addr : job_.dst_addr;
    seg_start_ = eng_.now();
    expect_ = eng_.now();
    next_beat();
  }

  void next_beat() {
    const std::uint32_t bytes = static_cast<std::uint32_t>(
        std::min<std::uint64_t>(beat_bytes_, bytes_left_));
    arb_.request(slot_, cursor_, bytes, [this, bytes] { on_beat_granted(bytes); });
  }

  void on_beat_granted(std::uint32_t bytes) {
    const Cycle c = eng_.now();
    const Phase stream = inbound_ ? Phase::StreamIn : Phase::StreamOut;
    if (c > expect_) {  // lost arbitration for (c - expect_) cycles
      if (expect_ > seg_start_) eng_.note(res_, stream, seg_start_, expect_);
      eng_.note(res_, Phase::ConflictStall, expect_, c);
      stall_cycles_ += c - expect_;
      seg_start_ = c;
    }
    expect_ = c + 1;
    cursor_ += bytes;
    bytes_left_ -= bytes;
    --beats_left_;
    if (beats_left_ > 0) {
      eng_.schedule(c + 1, res_, [this] { next_beat(); });
      return;
    }
    eng_.note(res_, stream, seg_start_, c + 1);
    if (inbound_) {
      if (job_.on_input_consumed) {
        auto fn = job_.on_input_consumed;
        eng_.schedule(c + 1, res_, [fn, t = c + 1] { fn(t); });
      }
      const Cycle eval_end = c + 1 + phases_.eval;
      eng_.note(res_, Phase::Eval, c + 1, eval_end);
      eng_.schedule(eval_end, res_, [this] { start_stream(false); });
    } else {
      busy_ = false;
      busy_cycles_ += (c + 1) - job_start_;
      // Always schedule the completion so the simulation clock reaches the
      // end of the stream-out phase.
      auto fn = job_.on_done;
      eng_.schedule(c + 1, res_, [fn, t = c + 1] {
        if (fn) fn(t);
      });
    }
  }

  SimEngine& eng_;
  ResourceId res_;
  const ValidatedArch& arch_;
  L1Arbiter& arb_;
  std::uint32_t slot_;

  bool busy_ = false;
  Job job_;
  ImaPhaseCycles phases_;
  Cycle job_start_ = 0;
  bool inbound_ = true;
  std::uint32_t beats_left_ = 0;
  std::uint32_t beat_bytes_ = 0;
  std::uint64_t bytes_left_ = 0;
  std::uint64_t cursor_ = 0;
  Cycle seg_start_ = 0;
  Cycle expect_ = 0;
  Cycle busy_cycles_ = 0;
  Cycle stall_cycles_ = 0;
};

/// Writes bytes landing from the interconnect into L1 in stripe-wide beats.
/// Not tied to a DMA channel: it models the receive path of remote and
/// broadcast traffic.
class RxPump {
 public:
  RxPump(SimEngine& eng, L1Arbiter& arb, std::uint32_t slot, std::uint64_t base_addr)
      : eng_(eng), arb_(arb), slot_(slot), cursor_(base_addr) {}

  void enqueue(std::uint64_t bytes, std::function<void(Cycle)> on_done) {
    q_.push_back({bytes, std::move(on_done)});
    if (!pumping_) {
      pumping_ = true;
      pump();
    }
  }

 private:
  struct Item {
    std::uint64_t bytes;
    std::function<void(Cycle)> on_done;
  };

  void pump() {
    if (q_.empty()) {
      pumping_ = false;
      return;
    }
    Item& it = q_.front();
    const std::uint32_t beat = static_cast<std::uint32_t>(
        std::min<std::uint64_t>(std::uint64_t(arb_.stripe_bytes()), it.bytes));
    arb_.request(slot_, cursor_, beat, [this, beat] {
      cursor_ += beat;
      Item& cur = q_.front();
      cur.bytes -= beat;
      if (cur.bytes == 0) {
        auto fn = std::move(cur.on_done);
        q_.pop_front();
        if (fn) {
          eng_.schedule(eng_.now() + 1, [fn, t = eng_.now() + 1] { fn(t); });
        }
        if (!q_.empty()) {
          eng_.schedule(eng_.now() + 1, [this] { pump(); });
        } else {
          pumping_ = false;
        }
      } else {
        eng_.schedule(eng_.now() + 1, [this] { pump(); });
      }
    });
  }

  SimEngine& eng_;
  L1Arbiter& arb_;
  std::uint32_t slot_;
  std::uint64_t cursor_;
  std::deque<Item> q_;
  bool pumping_ = false;
};

/// Multi-channel DMA. Descriptors are validated, take the lowest free
/// channel, and queue FIFO when all channels are busy, so several outstanding
/// transactions make progress at once. Inbound transfers deposit into L1 as
/// beats land; outbound transfers read L1 first, then occupy the link.
class DmaEngine {
 public:
  struct Descriptor {
    enum class Dir : std::uint8_t { l2_to_l1, l1_to_l2, l1_to_l1_remote };
    Dir direction = Dir::l2_to_l1;
    std::uint64_t bytes = 0;
    int src_cluster = -1;  // -1 = L2
    int dst_cluster = -1;
    std::uint64_t l2_addr = 0;
    std::uint64_t local_addr = 0;
    EventUnit::EventId completion_event = 0;  // 0 = none
    /// Byte marks fired when that prefix has been deposited into local L1
    /// (inbound) or delivered to the far side (outbound).
    std::vector<std::pair<std::uint64_t, std::function<void(Cycle)>>> markers;
    std::function<void(Cycle)> on_complete;
  };

  DmaEngine(SimEngine& eng, const std::string& cluster_name, std::uint32_t n_channels,
            L1Arbiter& arb, EventUnit& events)
      : eng_(eng), arb_(arb), events_(events) {
    channels_.reserve(n_channels);
    for (std::uint32_t i = 0; i < n_channels; ++i) {
      Channel ch;
      ch.resource = eng_.add_resource(cluster_name + ".dma" + std::to_string(i));
      ch.arb_slot = arb_.add_requester(L1Arbiter::Class::dma);
      channels_.push_back(std::move(ch));
    }
  }

  static void check(const Descriptor& d) {
    if (d.bytes == 0) throw SimError("dma transfer bytes must be > 0");
    if (d.direction == Descriptor::Dir::l1_to_l1_remote && d.src_cluster == d.dst_cluster) {
      throw SimError("remote l1-to-l1 transfer requires distinct clusters");
    }
  }

  /// `link` is the channel this transfer occupies (the shared CL<->L2 pool or
  /// a cluster-pair link); `link_requester` is this cluster's id on it.
  void submit(Descriptor d, SharedLink& link, std::uint32_t link_requester) {
    check(d);
    pending_.push_back(Pending{std::move(d), &link, link_requester});
    dispatch();
  }

  Cycle busy_cycles() const {
    Cycle sum = 0;
    for (const auto& ch : channels_) sum += ch.busy_cycles;
    return sum;
  }
  std::uint32_t n_channels() const { return static_cast<std::uint32_t>(channels_.size()); }
  std::uint32_t busy_channels() const {
    std::uint32_t n = 0;
    for (const auto& ch : channels_) n += ch.busy ? 1 : 0;
    return n;
  }

 private:
  struct InboundState;
  struct OutboundState;

  struct Channel {
    ResourceId resource = 0;
    std::uint32_t arb_slot = 0;
    bool busy = false;
    Cycle busy_cycles = 0;
    Cycle start = 0;
  };
  struct Pending {
    Descriptor d;
    SharedLink* link;
    std::uint32_t link_requester;
  };

  void dispatch() {
    while (!pending_.empty()) {
      Channel* free_ch = nullptr;
      for (auto& ch : channels_) {
        if (!ch.busy) { free_ch = &ch; break; }
      }
      if (!free_ch) return;
      Pending p = std::move(pending_.front());
      pending_.pop_front();
      start(*free_ch, std::move(p));
    }
  }

  void start(Channel& ch, Pending p) {
    ch.busy = true;
    ch.start = eng_.now();
    if (p.d.direction == Descriptor::Dir::l2_to_l1) {
      start_inbound(ch, std::move(p));
    } else {
      start_outbound(ch, std::move(p));
    }
  }

  // Inbound: the link streams bytes in; a deposit pump writes them to L1 in
  // stripe beats and fires the byte markers as they are committed.
  void start_inbound(Channel& ch, Pending p) {
    auto st = std::make_shared<InboundState>();
    st->d = std::move(p.d);
    st->ch = &ch;
    SharedLink::Desc ld;
    ld.requester = p.link_requester;
    ld.bytes = st->d.bytes;
    ld.l2dir = SharedLink::L2Dir::read;
    ld.l2_addr = st->d.l2_addr;
    ld.on_progress = [this, st](std::uint64_t delivered, Cycle) {
      st->arrived = delivered;
      pump_inbound(st);
    };
    p.link->submit(std::move(ld));
  }

  void pump_inbound(const std::shared_ptr<InboundState>& st) {
    if (st->pumping || st->deposited >= st->arrived) return;
    st->pumping = true;
    const std::uint32_t beat = static_cast<std::uint32_t>(std::min<std::uint64_t>(
        std::uint64_t(arb_.stripe_bytes()), st->arrived - st->deposited));
    arb_.request(st->ch->arb_slot, st->d.local_addr + st->deposited, beat, [this, st, beat] {
      st->deposited += beat;
      st->pumping = false;
      const Cycle done_at = eng_.now() + 1;
      while (st->next_marker < st->d.markers.size() &&
             st->d.markers[st->next_marker].first <= st->deposited) {
        auto fn = st->d.markers[st->next_marker].second;
        ++st->next_marker;
        eng_.schedule(done_at, st->ch->resource, [fn, done_at] { fn(done_at); });
      }
      if (st->deposited >= st->d.bytes) {
        eng_.schedule(done_at, st->ch->resource,
                      [this, st, done_at] { finish(*st->ch, st->d, Phase::DmaRead, done_at); });
      } else if (st->deposited < st->arrived) {
        eng_.schedule(done_at, st->ch->resource, [this, st] { pump_inbound(st); });
      }
    });
  }

  // Outbound: read the payload out of L1 in stripe beats, then transmit.
  void start_outbound(Channel& ch, Pending p) {
    auto st = std::make_shared<OutboundState>();
    st->d = std::move(p.d);
    st->ch = &ch;
    st->link = p.link;
    st->link_requester = p.link_requester;
    pump_outbound(st);
  }

  void pump_outbound(const std::shared_ptr<OutboundState>& st) {
    if (st->extracted >= st->d.bytes) {
      SharedLink::Desc ld;
      ld.requester = st->link_requester;
      ld.bytes = st->d.bytes;
      if (st->d.direction == Descriptor::Dir::l1_to_l2) {
        ld.l2dir = SharedLink::L2Dir::write;
        ld.l2_addr = st->d.l2_addr;
      }
      for (auto& m : st->d.markers) ld.thresholds.push_back(m);
      ld.on_complete = [this, st](Cycle, Cycle last) {
        finish(*st->ch, st->d, Phase::DmaWrite, last);
      };
      st->link->submit(std::move(ld));
      return;
    }
    const std::uint32_t beat = static_cast<std::uint32_t>(std::min<std::uint64_t>(
        std::uint64_t(arb_.stripe_bytes()), st->d.bytes - st->extracted));
    arb_.request(st->ch->arb_slot, st->d.local_addr + st->extracted, beat, [this, st, beat] {
      st->extracted += beat;
      eng_.schedule(eng_.now() + 1, st->ch->resource, [this, st] { pump_outbound(st); });
    });
  }

  void finish(Channel& ch, const Descriptor& d, Phase phase, Cycle end) {
    eng_.note(ch.resource, phase, ch.start, end);
    ch.busy_cycles += end - ch.start;
    ch.busy = false;
    if (d.completion_event != 0) events_.post(d.completion_event);
    if (d.on_complete) d.on_complete(end);
    dispatch();
  }

  struct InboundState {
    Descriptor d;
    Channel* ch = nullptr;
    std::uint64_t arrived = 0;
    std::uint64_t deposited = 0;
    std::size_t next_marker = 0;
    bool pumping = false;
  };
  struct OutboundState {
    Descriptor d;
    Channel* ch = nullptr;
    SharedLink* link = nullptr;
    std::uint32_t link_requester = 0;
    std::uint64_t extracted = 0;
  };

  SimEngine& eng_;
  L1Arbiter& arb_;
  EventUnit& events_;
  std::vector<Channel> channels_;
  std::deque<Pending> pending_;
};

}  // namespace aimcsim
