#include <doctest.h>

#include <atomic>
#include <thread>

#include "rculab/harness.hpp"
#include "rculab/rcu.hpp"

using namespace rculab;

TEST_CASE("readers make progress while a synchronize caller is stalled") {
  SteadyClock clock;
  RcuDomain domain(8, &clock);

  ReaderHandle blocker_handle = domain.register_reader();
  ReadGuard blocker = domain.read_enter(blocker_handle);

  std::atomic<bool> sync_returned{false};
  std::thread syncer([&] {
    domain.synchronize();
    sync_returned.store(true);
  });

  std::thread reader([&] {
    ReaderHandle h = domain.register_reader();
    for (int i = 0; i < 10000; ++i) {
      ReadGuard g = domain.read_enter(h);
      g.exit();
    }
  });
  reader.join();  // completes unboundedly many sections while sync is stuck
  CHECK_FALSE(sync_returned.load());

  blocker.exit();
  syncer.join();
  CHECK(sync_returned.load());
}

TEST_CASE("a million live lookups race the churn without a single torn read") {
  std::uint64_t lookups = 0;
  std::uint64_t seed = 31;
  while (lookups < 1000000) {
    ChurnConfig cfg;
    cfg.mode = RunMode::Live;
    cfg.policy = ReclamationPolicy::immediate();
    cfg.iterations = 60;
    cfg.vfs_per_cycle = 16;
    cfg.reader_count = 4;
    cfg.arena_pages = 1024;
    cfg.seed = seed++;
    RunReport r = run_churn(cfg);
    CHECK(r.torn_reads == 0);
    CHECK(r.outcome == Outcome::Completed);
    CHECK(r.completed_iterations == 60);
    CHECK(r.snapshots.back().slab_analog_pages == 0);
    CHECK(r.snapshots.back().sunreclaim_analog_pages == 0);
    CHECK(r.snapshots.back().free_pages == 1024);
    for (const auto& s : r.snapshots) CHECK(s.accounting_identity_holds());
    lookups += r.totals.clean_hits + r.totals.clean_misses;
  }
  CHECK(lookups >= 1000000);
}

TEST_CASE("live churn under synchronize_rcu with a grace driver stays clean") {
  ChurnConfig cfg;
  cfg.mode = RunMode::Live;
  cfg.policy = ReclamationPolicy::synchronize_rcu();
  cfg.iterations = 20;
  cfg.vfs_per_cycle = 8;
  cfg.reader_count = 2;
  cfg.arena_pages = 512;
  cfg.seed = 33;
  RunReport r = run_churn(cfg);
  CHECK(r.torn_reads == 0);
  CHECK(r.outcome == Outcome::Completed);
  CHECK(r.snapshots.back().free_pages == 512);
}

TEST_CASE("live call_rcu churn with a fast driver reclaims everything in the end") {
  ChurnConfig cfg;
  cfg.mode = RunMode::Live;
  cfg.policy = ReclamationPolicy::call_rcu();
  cfg.iterations = 20;
  cfg.vfs_per_cycle = 8;
  cfg.reader_count = 2;
  cfg.arena_pages = 512;
  cfg.grace_driver_period = 200;  // microseconds
  cfg.seed = 35;
  RunReport r = run_churn(cfg);
  CHECK(r.torn_reads == 0);
  CHECK(r.outcome == Outcome::Completed);
  CHECK(r.snapshots.back().sunreclaim_analog_pages == 0);
  CHECK(r.snapshots.back().free_pages == 512);
}
