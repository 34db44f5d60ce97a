#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "aimcsim/arch.hpp"
#include "aimcsim/engine.hpp"
#include "aimcsim/types.hpp"

namespace aimcsim {

/// Multi-banked scratchpad target. Word-interleaved bank selection; only
/// simultaneous addressing of the same bank serializes.
class L2Banks {
 public:
  L2Banks(std::uint32_t banks, std::uint32_t word_bytes, std::uint64_t capacity_bytes)
      : banks_(banks), word_bytes_(word_bytes), capacity_(capacity_bytes),
        busy_until_(banks, 0), claim_cycle_(banks, ~Cycle{0}), claim_word_(banks, 0) {}

  std::uint32_t banks() const { return banks_; }
  std::uint64_t capacity() const { return capacity_; }
  std::uint32_t bank_of(std::uint64_t addr) const {
    return static_cast<std::uint32_t>((addr / word_bytes_) % banks_);
  }

  /// Standalone access: grants the request at the first cycle >= `cycle`
  /// where every touched bank is free; same-bank requests serialize one per
  /// cycle per bank. Returns the grant cycle.
  Cycle access(std::uint64_t addr, std::uint64_t bytes, Cycle cycle) {
    if (bytes == 0) throw SimError("l2 access of zero bytes");
    if (addr + bytes > capacity_) throw SimError("l2 address out of range");
    const std::uint32_t first = bank_of(addr);
    const std::uint32_t last = bank_of(addr + bytes - 1);
    Cycle grant = cycle;
    auto touch = [&](std::uint32_t b) { grant = std::max(grant, busy_until_[b]); };
    if (bytes >= std::uint64_t(banks_) * word_bytes_) {
      for (std::uint32_t b = 0; b < banks_; ++b) touch(b);
    } else {
      for (std::uint32_t b = first;; b = (b + 1) % banks_) {
        touch(b);
        if (b == last) break;
      }
    }
    conflicts_ += grant - cycle;
    auto claim = [&](std::uint32_t b) { busy_until_[b] = grant + 1; };
    if (bytes >= std::uint64_t(banks_) * word_bytes_) {
      for (std::uint32_t b = 0; b < banks_; ++b) claim(b);
    } else {
      for (std::uint32_t b = first;; b = (b + 1) % banks_) {
        claim(b);
        if (b == last) break;
      }
    }
    return grant;
  }

  /// Per-cycle claim used by the link model. A stream claims a bank when its
  /// cursor enters a new word; simultaneous entries into the same word merge
  /// into a single bank read, and a different word on a busy bank loses the
  /// cycle.
  bool claim_word(std::uint64_t addr, Cycle cycle) {
    const std::uint32_t b = bank_of(addr % capacity_);
    const std::uint64_t word = (addr % capacity_) / word_bytes_;
    if (claim_cycle_[b] != cycle) {
      claim_cycle_[b] = cycle;
      claim_word_[b] = word;
      return true;
    }
    if (claim_word_[b] == word) return true;
    ++conflicts_;
    return false;
  }

  std::uint64_t word_of(std::uint64_t addr) const { return (addr % capacity_) / word_bytes_; }

  std::uint64_t conflicts() const { return conflicts_; }

 private:
  std::uint32_t banks_;
  std::uint32_t word_bytes_;
  std::uint64_t capacity_;
  std::vector<Cycle> busy_until_;
  std::vector<Cycle> claim_cycle_;
  std::vector<std::uint64_t> claim_word_;
  std::uint64_t conflicts_ = 0;
};

/// A shared-capacity communication channel. Active transfers share the
/// per-cycle bit budget equally (remainder bits rotate round-robin), the
/// first beat lands latency_cycles after the grant, and broadcast occupies
/// the channel once while delivering to every destination.
class SharedLink {
 public:
  enum class L2Dir : std::uint8_t { none, read, write };

  struct Desc {
    std::uint32_t requester = 0;
    std::uint64_t bytes = 0;
    bool broadcast = false;
    std::uint32_t fanout = 1;
    L2Dir l2dir = L2Dir::none;
    std::uint64_t l2_addr = 0;
    /// (byte mark, callback) pairs, ascending; fired at the delivery cycle of
    /// the beat that crosses the mark.
    std::vector<std::pair<std::uint64_t, std::function<void(Cycle)>>> thresholds;
    /// Called at each delivery-time progress step with cumulative bytes.
    std::function<void(std::uint64_t, Cycle)> on_progress;
    std::function<void(Cycle first_beat, Cycle last_beat)> on_complete;
  };

  SharedLink(SimEngine& eng, std::string name, std::uint64_t capacity_bits, Cycle latency,
             bool broadcast_ok, LinkAccounting accounting, std::uint32_t n_requesters,
             L2Banks* l2 = nullptr)
      : eng_(eng), capacity_(capacity_bits), latency_(latency), broadcast_ok_(broadcast_ok),
        accounting_(accounting), l2_(l2), requester_wait_(n_requesters, 0) {
    resource_ = eng_.add_resource(std::move(name));
    if (capacity_ == 0) throw SimError("link capacity must be > 0");
  }

  void submit(Desc d) {
    if (d.bytes == 0) throw SimError("link transfer of zero bytes");
    if (d.broadcast && !broadcast_ok_) throw SimError("broadcast requested on wired link");
    if (d.broadcast && d.fanout == 0) throw SimError("broadcast with no destinations");
    if (!d.broadcast && d.fanout != 1) throw SimError("unicast transfer must have one destination");
    Active a;
    a.d = std::move(d);
    a.grant = eng_.now();
    active_.push_back(std::move(a));
    if (!tick_scheduled_) {
      tick_scheduled_ = true;
      const Cycle when = (last_tick_ == eng_.now()) ? eng_.now() + 1 : eng_.now();
      eng_.schedule(when, resource_, [this] { tick(); });
    }
  }

  Cycle busy_cycles() const { return busy_cycles_; }
  std::uint64_t delivered_bytes() const { return delivered_bytes_; }
  std::uint64_t broadcast_saved_bytes() const { return broadcast_saved_; }
  std::uint64_t l2_read_bytes() const { return l2_read_bytes_; }
  std::uint64_t l2_write_bytes() const { return l2_write_bytes_; }
  const std::vector<Cycle>& requester_wait() const { return requester_wait_; }

 private:
  struct Active {
    Desc d;
    Cycle grant = 0;
    std::uint64_t sent_bits = 0;
    std::size_t next_thr = 0;
    bool first_sent = false;
    Cycle first_beat = 0;
    std::uint64_t last_l2_word = ~std::uint64_t{0};
  };

  void tick() {
    const Cycle c = eng_.now();
    last_tick_ = c;
    bool any_granted = false;

    // Shares are computed per accounting group, then each transfer advances.
    auto group_of = [this](const Active& a) -> int {
      if (accounting_ == LinkAccounting::aggregate_shared) return 0;
      return a.d.l2dir == L2Dir::read ? 0 : 1;
    };
    const int n_groups = accounting_ == LinkAccounting::aggregate_shared ? 1 : 2;
    for (int g = 0; g < n_groups; ++g) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < active_.size(); ++i) {
        if (group_of(active_[i]) == g) members.push_back(i);
      }
      if (members.empty()) continue;
      const std::uint64_t n = members.size();
      const std::uint64_t base = capacity_ / n;
      const std::uint64_t rem = capacity_ % n;
      // Remainder bits rotate with the absolute cycle.
      const std::uint64_t start = c % n;
      for (std::uint64_t k = 0; k < n; ++k) {
        Active& a = active_[members[k]];
        std::uint64_t share = base + (((k + n - start) % n) < rem ? 1 : 0);
        const std::uint64_t total_bits = a.d.bytes * 8;
        share = std::min(share, total_bits - a.sent_bits);
        if (share == 0) {
          if (a.d.requester < requester_wait_.size()) ++requester_wait_[a.d.requester];
          continue;
        }
        // L2 bank check: entering a new word requires winning its bank this
        // cycle. Progress within an already-fetched word needs no new access.
        if (l2_ && a.d.l2dir != L2Dir::none) {
          const std::uint64_t cursor = a.d.l2_addr + a.sent_bits / 8;
          const std::uint64_t word = l2_->word_of(cursor);
          if (word != a.last_l2_word) {
            if (!l2_->claim_word(cursor, c)) {
              if (a.d.requester < requester_wait_.size()) ++requester_wait_[a.d.requester];
              continue;
            }
            a.last_l2_word = word;
          }
        }
        advance(a, share, c);
        any_granted = true;
      }
    }

    if (any_granted) ++busy_cycles_;
    std::erase_if(active_, [](const Active& a) { return a.sent_bits >= a.d.bytes * 8; });
    if (!active_.empty()) {
      eng_.schedule(c + 1, resource_, [this] { tick(); });
    } else {
      tick_scheduled_ = false;
    }
  }

  void advance(Active& a, std::uint64_t bits, Cycle c) {
    if (!a.first_sent) {
      a.first_sent = true;
      a.first_beat = c + 1 + latency_;
    }
    a.sent_bits += bits;
    // Bits granted in cycle c are visible at c + 1 + latency, so a transfer
    // completes grant + latency + ceil(bits/share) as the sharing rule says.
    const Cycle deliver = c + 1 + latency_;
    const std::uint64_t sent_bytes = a.sent_bits / 8;
    while (a.next_thr < a.d.thresholds.size() &&
           a.d.thresholds[a.next_thr].first * 8 <= a.sent_bits) {
      auto fn = a.d.thresholds[a.next_thr].second;
      ++a.next_thr;
      eng_.schedule(deliver, resource_, [fn, deliver] { fn(deliver); });
    }
    if (a.d.on_progress) {
      auto fn = a.d.on_progress;
      eng_.schedule(deliver, resource_, [fn, sent_bytes, deliver] { fn(sent_bytes, deliver); });
    }
    if (a.sent_bits >= a.d.bytes * 8) {
      delivered_bytes_ += a.d.bytes;
      if (a.d.broadcast) broadcast_saved_ += std::uint64_t(a.d.fanout - 1) * a.d.bytes;
      if (a.d.l2dir == L2Dir::read) l2_read_bytes_ += a.d.bytes;
      if (a.d.l2dir == L2Dir::write) l2_write_bytes_ += a.d.bytes;
      if (a.d.on_complete) {
        auto fn = a.d.on_complete;
        const Cycle first = a.first_beat;
        eng_.schedule(deliver, resource_, [fn, first, deliver] { fn(first, deliver); });
      }
    }
  }

  SimEngine& eng_;
  ResourceId resource_;
  std::uint64_t capacity_;
  Cycle latency_;
  bool broadcast_ok_;
  LinkAccounting accounting_;
  L2Banks* l2_;

  std::vector<Active> active_;
  bool tick_scheduled_ = false;
  Cycle last_tick_ = ~Cycle{0};

  Cycle busy_cycles_ = 0;
  std::uint64_t delivered_bytes_ = 0;
  std::uint64_t broadcast_saved_ = 0;
  std::uint64_t l2_read_bytes_ = 0;
  std::uint64_t l2_write_bytes_ = 0;
  std::vector<Cycle> requester_wait_;
};

}  // namespace aimcsim
