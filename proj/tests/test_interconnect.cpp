#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "aimcsim/engine.hpp"
#include "aimcsim/interconnect.hpp"
#include "oracles.hpp"

using namespace aimcsim;

namespace {

struct TransferResult {
  Cycle first_beat = 0;
  Cycle last_beat = 0;
  bool done = false;
};

struct LinkHarness {
  SimEngine eng;
  SharedLink link;

  LinkHarness(std::uint64_t capacity, Cycle latency, bool wireless, std::uint32_t n_req = 8,
              L2Banks* l2 = nullptr,
              LinkAccounting acc = LinkAccounting::aggregate_shared)
      : link(eng, "link", capacity, latency, wireless, acc, n_req, l2) {}

  TransferResult* submit_at(Cycle when, std::uint32_t requester, std::uint64_t bytes,
                            bool broadcast = false, std::uint32_t fanout = 1,
                            SharedLink::L2Dir dir = SharedLink::L2Dir::none,
                            std::uint64_t addr = 0) {
    auto* res = results.emplace_back(std::make_unique<TransferResult>()).get();
    eng.schedule(when, [this, requester, bytes, broadcast, fanout, dir, addr, res] {
      SharedLink::Desc d;
      d.requester = requester;
      d.bytes = bytes;
      d.broadcast = broadcast;
      d.fanout = fanout;
      d.l2dir = dir;
      d.l2_addr = addr;
      d.on_complete = [res](Cycle first, Cycle last) {
        res->first_beat = first;
        res->last_beat = last;
        res->done = true;
      };
      link.submit(std::move(d));
    });
    return res;
  }

  std::vector<std::unique_ptr<TransferResult>> results;
};

}  // namespace

TEST_CASE("link_transfer durations on an idle link", "[interconnect]") {
  SECTION("wireless: 256 bytes at 256 bit/cycle, latency 1") {
    LinkHarness h(256, 1, /*wireless=*/true);
    auto* r = h.submit_at(0, 0, 256);
    h.eng.run_until_idle();
    REQUIRE(r->done);
    CHECK(r->last_beat == 1 + 8);  // 2048/256 beats + 1 cycle latency
    CHECK(h.link.busy_cycles() == 8);
  }
  SECTION("wired: 256 bytes at 64 bit/cycle, latency 9") {
    LinkHarness h(64, 9, /*wireless=*/false);
    auto* r = h.submit_at(0, 0, 256);
    h.eng.run_until_idle();
    REQUIRE(r->done);
    CHECK(r->last_beat == 9 + 32);
    CHECK(h.link.busy_cycles() == 32);
  }
}

TEST_CASE("two simultaneous transfers halve fairly", "[interconnect]") {
  LinkHarness h(64, 9, false);
  auto* a = h.submit_at(0, 0, 256);
  auto* b = h.submit_at(0, 1, 256);
  h.eng.run_until_idle();
  REQUIRE(a->done);
  REQUIRE(b->done);
  CHECK(a->last_beat == 9 + 64);
  CHECK(b->last_beat == 9 + 64);

  // cross-check against the independent round-robin oracle
  auto ref = oracles::ref_link_completions({{0, 256}, {0, 256}}, 64, 9);
  CHECK(a->last_beat == ref[0]);
  CHECK(b->last_beat == ref[1]);
}

TEST_CASE("staggered contention matches the round-robin oracle", "[interconnect]") {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<oracles::RefRequest> reqs;
    const int n = 2 + rng() % 5;
    for (int i = 0; i < n; ++i) {
      reqs.push_back({rng() % 40, 1 + rng() % 512});
    }
    const std::uint64_t cap = std::vector<std::uint64_t>{64, 128, 256}[rng() % 3];
    const Cycle lat = 1 + rng() % 9;
    LinkHarness h(cap, lat, true, static_cast<std::uint32_t>(n));
    std::vector<TransferResult*> rs;
    for (int i = 0; i < n; ++i) {
      rs.push_back(h.submit_at(reqs[i].issue_cycle, static_cast<std::uint32_t>(i), reqs[i].bytes));
    }
    h.eng.run_until_idle();
    const auto ref = oracles::ref_link_completions(reqs, cap, lat);
    for (int i = 0; i < n; ++i) {
      CAPTURE(trial, i, cap, lat);
      REQUIRE(rs[i]->done);
      CHECK(rs[i]->last_beat == ref[i]);
    }
  }
}

TEST_CASE("latency isolation: single requester is exact", "[interconnect]") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::uint64_t cap = 1 + rng() % 300;
    const Cycle lat = rng() % 12;
    const std::uint64_t bytes = 1 + rng() % 4096;
    LinkHarness h(cap, lat, true);
    auto* r = h.submit_at(3, 0, bytes);
    h.eng.run_until_idle();
    REQUIRE(r->done);
    CHECK(r->last_beat - 3 == lat + ceil_div<std::uint64_t>(bytes * 8, cap));
  }
}

TEST_CASE("monotonicity: more bandwidth never finishes later", "[interconnect]") {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 15; ++trial) {
    std::vector<oracles::RefRequest> reqs;
    const int n = 2 + rng() % 6;
    for (int i = 0; i < n; ++i) reqs.push_back({rng() % 64, 1 + rng() % 2048});
    std::vector<std::vector<Cycle>> finishes;
    for (std::uint64_t cap : {64ull, 128ull, 256ull}) {
      LinkHarness h(cap, 9, true, static_cast<std::uint32_t>(n));
      std::vector<TransferResult*> rs;
      for (int i = 0; i < n; ++i) {
        rs.push_back(h.submit_at(reqs[i].issue_cycle, static_cast<std::uint32_t>(i), reqs[i].bytes));
      }
      h.eng.run_until_idle();
      std::vector<Cycle> fin;
      for (auto* r : rs) fin.push_back(r->last_beat);
      finishes.push_back(fin);
    }
    for (int i = 0; i < n; ++i) {
      CHECK(finishes[1][i] <= finishes[0][i]);
      CHECK(finishes[2][i] <= finishes[1][i]);
    }
  }
}

TEST_CASE("per-cycle capacity conservation", "[interconnect]") {
  // total delivered bytes equals total requested bytes, and the busy-cycle
  // count implies granted bits never exceeded capacity
  std::mt19937 rng(77);
  std::vector<oracles::RefRequest> reqs;
  std::uint64_t total = 0;
  for (int i = 0; i < 10; ++i) {
    reqs.push_back({rng() % 100, 1 + rng() % 1000});
    total += reqs.back().bytes;
  }
  LinkHarness h(128, 4, true, 10);
  for (int i = 0; i < 10; ++i) {
    h.submit_at(reqs[i].issue_cycle, static_cast<std::uint32_t>(i), reqs[i].bytes);
  }
  h.eng.run_until_idle();
  CHECK(h.link.delivered_bytes() == total);
  CHECK(h.link.busy_cycles() * 128 >= total * 8);  // <= capacity per busy cycle
}

TEST_CASE("broadcast occupies the channel once", "[interconnect]") {
  SECTION("16 destinations, one 8-beat occupancy") {
    LinkHarness h(256, 1, true);
    auto* r = h.submit_at(0, 0, 256, /*broadcast=*/true, /*fanout=*/16,
                          SharedLink::L2Dir::read, 0);
    h.eng.run_until_idle();
    REQUIRE(r->done);
    CHECK(h.link.busy_cycles() == 8);  // 16 unicasts would take 128
    CHECK(h.link.l2_read_bytes() == 256);  // L2 is read once
    CHECK(h.link.broadcast_saved_bytes() == 15 * 256);
  }
  SECTION("degenerate broadcast to one destination equals unicast") {
    LinkHarness h1(256, 1, true);
    auto* b = h1.submit_at(0, 0, 256, true, 1);
    h1.eng.run_until_idle();
    LinkHarness h2(256, 1, true);
    auto* u = h2.submit_at(0, 0, 256);
    h2.eng.run_until_idle();
    CHECK(b->last_beat == u->last_beat);
    CHECK(h1.link.busy_cycles() == h2.link.busy_cycles());
  }
  SECTION("broadcast on a wired link is rejected") {
    LinkHarness h(256, 9, /*wireless=*/false);
    SharedLink::Desc d;
    d.bytes = 64;
    d.broadcast = true;
    d.fanout = 4;
    CHECK_THROWS_WITH(h.link.submit(std::move(d)),
                      Catch::Matchers::ContainsSubstring("broadcast requested on wired link"));
  }
}

TEST_CASE("per_direction accounting gives each direction full capacity", "[interconnect]") {
  L2Banks l2(16, 8, 1 << 20);
  LinkHarness h(64, 0, true, 8, &l2, LinkAccounting::per_direction);
  auto* rd = h.submit_at(0, 0, 256, false, 1, SharedLink::L2Dir::read, 0);
  auto* wr = h.submit_at(0, 1, 256, false, 1, SharedLink::L2Dir::write, 4104);
  h.eng.run_until_idle();
  // both directions run at the full 64 bit/cycle instead of sharing
  CHECK(rd->last_beat == 32);
  CHECK(wr->last_beat == 32);
}

TEST_CASE("l2_access serializes only same-bank requests", "[interconnect]") {
  L2Banks l2(16, 8, 1 << 20);
  SECTION("different banks in the same cycle") {
    CHECK(l2.access(0, 8, 10) == 10);
    CHECK(l2.access(8, 8, 10) == 10);  // next word -> next bank
    CHECK(l2.conflicts() == 0);
  }
  SECTION("same bank in the same cycle serializes") {
    CHECK(l2.access(0, 8, 10) == 10);
    CHECK(l2.access(16 * 8, 8, 10) == 11);  // same bank, one stride later
    CHECK(l2.conflicts() == 1);
  }
  SECTION("out of range") {
    CHECK_THROWS_AS(l2.access((1 << 20) - 4, 8, 0), SimError);
  }
  SECTION("16 striding streamers never collide") {
    L2Banks banked(16, 8, 1 << 20);
    for (Cycle t = 0; t < 64; ++t) {
      for (std::uint32_t s = 0; s < 16; ++s) {
        banked.access((s + t * 16) * 8, 8, t);
      }
    }
    CHECK(banked.conflicts() == 0);
    CHECK(oracles::ref_strided_bank_conflicts(16, 16, 8, 64) == 0);
  }
}

TEST_CASE("link transfers crossing L2 count bank conflicts transiently", "[interconnect]") {
  // two write streams starting on the same bank (different words) de-phase
  // after a stall instead of serializing the whole run
  L2Banks l2(16, 8, 1 << 20);
  LinkHarness h(256, 1, true, 4, &l2);
  h.submit_at(0, 0, 4096, false, 1, SharedLink::L2Dir::write, 0);
  h.submit_at(0, 1, 4096, false, 1, SharedLink::L2Dir::write, 16 * 8);
  h.eng.run_until_idle();
  CHECK(l2.conflicts() > 0);
  CHECK(l2.conflicts() < 16);
}
