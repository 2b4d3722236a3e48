#include "rculab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <chrono>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace rculab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Pin pages at the arena base, like boot-time reserved memory. A count that
// is not a multiple of the VF footprint knocks every later allocation off the
// clean alignment lattice and punctures the base run for good.
void pin_reserved_pages(BuddyAllocator& allocator, std::uint32_t count) {
  if (static_cast<std::uint64_t>(count) >= allocator.total_pages())
    throw Error(Errc::ConfigError, "reserved_pages exceeds the arena");
  for (std::uint32_t i = 0; i < count; ++i) allocator.alloc(0, false);
}

}  // namespace

const char* run_mode_name(RunMode m) { return m == RunMode::Scripted ? "scripted" : "live"; }

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Completed: return "completed";
    case Outcome::OomPanic: return "oom_panic";
    case Outcome::UafDetected: return "uaf_detected";
  }
  return "?";
}

RunMode run_mode_from_name(const std::string& s) {
  if (s == "scripted") return RunMode::Scripted;
  if (s == "live") return RunMode::Live;
  throw Error(Errc::ConfigError, "unknown mode '" + s + "'");
}

Outcome outcome_from_name(const std::string& s) {
  if (s == "completed") return Outcome::Completed;
  if (s == "oom_panic") return Outcome::OomPanic;
  if (s == "uaf_detected") return Outcome::UafDetected;
  throw Error(Errc::ConfigError, "unknown outcome '" + s + "'");
}

const char* read_class_name(ReadClass c) {
  switch (c) {
    case ReadClass::CleanHit: return "clean_hit";
    case ReadClass::CleanMiss: return "clean_miss";
    case ReadClass::StaleHit: return "stale_hit";
    case ReadClass::UafHit: return "uaf_hit";
  }
  return "?";
}

const char* timing_phase_name(TimingPhase p) {
  switch (p) {
    case TimingPhase::Occupied: return "occupied";
    case TimingPhase::PostUnlinkPreFree: return "post_unlink_pre_free";
    case TimingPhase::PostFree: return "post_free";
  }
  return "?";
}

void ChurnConfig::validate() const {
  if (iterations == 0) throw Error(Errc::ConfigError, "iterations must be positive");
  if (vfs_per_cycle == 0) throw Error(Errc::ConfigError, "vfs_per_cycle must be positive");
  if (vfs_per_cycle > max_vfs)
    throw Error(Errc::ConfigError, "vfs_per_cycle exceeds max_vfs");
  if (snapshot_every == 0) throw Error(Errc::ConfigError, "snapshot_every must be positive");
  if (reader_count > 32) throw Error(Errc::ConfigError, "reader_count capped at 32");
  if (arena_pages == 0 || (arena_pages & (arena_pages - 1)) != 0)
    throw Error(Errc::ConfigError, "arena_pages must be a power of two");
  if (policy.kind == PolicyKind::RateLimited && policy.inner == PolicyKind::RateLimited)
    throw Error(Errc::ConfigError, "ratelimit cannot wrap itself");
}

ReadClass classify_read(Lifecycle state_at_deref, Tick section_start, Tick unlink_time) {
  switch (state_at_deref) {
    case Lifecycle::Freed:
      return ReadClass::UafHit;
    case Lifecycle::Unlinked:
      if (section_start >= unlink_time)
        throw std::logic_error(
            "shadow checker: unlinked entry reached from a section newer than the unlink");
      return ReadClass::StaleHit;
    case Lifecycle::Published:
      return ReadClass::CleanHit;
  }
  return ReadClass::CleanHit;
}

SimWorld::SimWorld(std::uint32_t arena_pages, std::uint32_t buckets, HashConfig hash,
                   ReclamationPolicy policy, VfFootprintSpec footprint,
                   std::uint32_t max_vfs)
    : sched(),
      domain(RcuDomain::kDefaultMaxReaders, &sched.clock()),
      allocator(arena_pages),
      table(buckets, hash, &sched.clock()),
      log(),
      manager(table, allocator, domain, policy, std::move(footprint), max_vfs, log,
              &sched.clock()) {}

ReadClass SimWorld::classify_visit(EntryRecord* entry, const ReadGuard& guard) {
  ReadClass c = classify_read(entry->state.load(), guard.entered_tick(),
                              entry->unlink_time.load());
  switch (c) {
    case ReadClass::StaleHit:
      ++stale_count;
      log.record(Event{sched.now(), EventKind::Stale, entry->key, 0});
      break;
    case ReadClass::UafHit:
      ++uaf_count;
      log.record(Event{sched.now(), EventKind::Uaf, entry->key, 0});
      break;
    default:
      break;
  }
  return c;
}

void SimWorld::record_miss() { ++clean_misses; }

// ---------------------------------------------------------------------------
// Scripted churn
// ---------------------------------------------------------------------------

namespace {

struct ChurnSim {
  ChurnConfig cfg;
  SimWorld world;

  int token_holder = -1;  // -1 free; whole set_num_vfs intents are serialized
  std::uint32_t progress_up = 0;
  std::uint32_t progress_down = 0;
  bool up_done = false;
  bool down_done = false;
  bool oom_panic = false;
  std::optional<OomEvent> first_oom;
  std::vector<MemSnapshot> snapshots;

  explicit ChurnSim(const ChurnConfig& c)
      : cfg(c),
        world(c.arena_pages, c.bucket_count, HashConfig{}, c.policy,
              VfFootprintSpec::standard(), c.max_vfs) {
    if (c.backlog_hold_ticks > 0) world.manager.set_backlog_divert(true);
    pin_reserved_pages(world.allocator, c.reserved_pages);
  }

  void snapshot_now() {
    snapshots.push_back(take_snapshot(world.manager, world.domain, world.sched.clock()));
  }

  void handle_oom(const OomEvent& oom, std::uint32_t iteration) {
    if (!first_oom) {
      first_oom = oom;
      first_oom->iteration = iteration + 1;  // 1-based cycle index
    }
    if (cfg.panic_on_oom) {
      oom_panic = true;
      world.stop = true;
    }
  }

  void finish_side(bool up) {
    (up ? up_done : down_done) = true;
    if (up_done && down_done) world.stop = true;
  }
};

Actor churn_reader(ChurnSim& sim, std::uint64_t rng_seed) {
  SimWorld& w = sim.world;
  ReaderHandle handle = w.domain.register_reader();
  std::mt19937_64 rng(rng_seed);
  while (!w.stop) {
    co_await w.sched.yield();
    if (w.stop) break;
    std::uint64_t key = rng() % sim.cfg.vfs_per_cycle;
    ReadGuard guard = w.domain.read_enter(handle);
    LookupCursor cur = w.table.lookup_begin(key);
    for (;;) {
      bool more = cur.advance();
      if (cur.visited()) w.classify_visit(cur.visited(), guard);
      if (!more) break;
      co_await w.sched.yield();
    }
    if (cur.found()) {
      co_await w.sched.yield();  // hold the reference across an interleaving point
      if (w.classify_visit(cur.found(), guard) == ReadClass::CleanHit) ++w.clean_hits;
    } else {
      w.record_miss();
    }
    guard.exit();
  }
}

Actor churn_writer_up(ChurnSim& sim) {
  SimWorld& w = sim.world;
  for (std::uint32_t it = 0; it < sim.cfg.iterations && !w.stop; ++it) {
    co_await w.sched.wait_until([&] { return sim.token_holder == -1 || w.stop; });
    if (w.stop) break;
    sim.token_holder = 0;
    while (w.manager.num_vfs() < sim.cfg.vfs_per_cycle && !w.stop) {
      co_await w.sched.yield();
      if (w.stop) break;
      if (auto oom = w.manager.create_vf(w.manager.next_free_key())) {
        sim.handle_oom(*oom, it);
        break;  // abort the remaining creations this cycle
      }
    }
    sim.token_holder = -1;
    sim.progress_up = it + 1;
    co_await w.sched.wait_until([&] { return sim.progress_down >= it + 1 || w.stop; });
    if (w.stop) break;
    if ((it + 1) % sim.cfg.snapshot_every == 0) sim.snapshot_now();
  }
  sim.finish_side(true);
}

Actor churn_writer_down(ChurnSim& sim) {
  SimWorld& w = sim.world;
  const PolicyKind kind = sim.cfg.policy.effective();
  for (std::uint32_t it = 0; it < sim.cfg.iterations && !w.stop; ++it) {
    co_await w.sched.wait_until([&] { return sim.token_holder == -1 || w.stop; });
    if (w.stop) break;
    sim.token_holder = 1;
    while (w.manager.num_vfs() > 0 && !w.stop) {
      co_await w.sched.yield();
      if (w.stop) break;
      if (sim.cfg.policy.rate_limited()) {
        while (!w.manager.token_bucket().try_take(w.sched.now()) && !w.stop) {
          co_await w.sched.wait_time(
              w.manager.token_bucket().next_ready(w.sched.now()));
        }
        if (w.stop) break;
      }
      EntryRecord* entry = w.manager.unlink_vf(w.manager.highest_live_key());
      co_await w.sched.yield();  // the stale window
      if (kind == PolicyKind::SynchronizeRcu) {
        GraceWait gw(w.domain);
        while (!gw.done() && !w.stop) {
          co_await w.sched.wait_until(
              [&] { return gw.done() || w.domain.can_advance() || w.stop; });
          if (!gw.done() && !w.stop) w.domain.advance_grace_period();
        }
        if (w.stop) break;  // panic stop: the entry stays unlinked
        w.manager.release_footprint(entry);
      } else if (kind == PolicyKind::CallRcu) {
        w.manager.enqueue_deferred_release(entry);
      } else {
        // Immediate free with no grace period; the backlog knob may divert
        // part of it through the deferred queue.
        w.manager.apply_reclamation(entry);
      }
    }
    sim.token_holder = -1;
    sim.progress_down = it + 1;
    co_await w.sched.wait_until([&] { return sim.progress_up >= it + 1 || w.stop; });
  }
  sim.finish_side(false);
}

Actor churn_grace_driver(ChurnSim& sim) {
  SimWorld& w = sim.world;
  Tick next = sim.cfg.grace_driver_period;
  while (!w.stop) {
    co_await w.sched.wait_time(next);
    if (w.stop) break;
    w.domain.advance_grace_period();
    next += sim.cfg.grace_driver_period;
  }
}

Actor churn_backlog_reader(ChurnSim& sim) {
  SimWorld& w = sim.world;
  ReaderHandle handle = w.domain.register_reader();
  while (!w.stop) {
    ReadGuard guard = w.domain.read_enter(handle);
    co_await w.sched.wait_for(sim.cfg.backlog_hold_ticks);
    guard.exit();
    co_await w.sched.yield();  // quiescent gap between holds
  }
}

RunReport finalize_report(ChurnSim& sim, std::uint64_t completed_iterations) {
  SimWorld& w = sim.world;
  if (!sim.oom_panic) {
    // Epilogue: tear down and drive all reclamation to quiescence.
    while (w.manager.num_vfs() > 0) {
      EntryRecord* e = w.manager.unlink_vf(w.manager.highest_live_key());
      w.manager.apply_reclamation(e);
    }
    while (w.domain.callbacks_pending() > 0) w.domain.advance_grace_period();
  }
  if (!w.table.audit_unreachable(w.manager.entries()).empty())
    throw std::logic_error("audit: a non-published entry is still reachable");
  sim.snapshot_now();

  RunReport r;
  r.config = sim.cfg;
  r.totals = w.log.tally();
  r.totals.clean_hits = w.clean_hits;
  r.totals.clean_misses = w.clean_misses;
  r.grace_periods = w.domain.grace_periods_completed();
  r.completed_iterations = completed_iterations;
  r.snapshots = std::move(sim.snapshots);
  r.first_oom = sim.first_oom;
  if (sim.oom_panic)
    r.outcome = Outcome::OomPanic;
  else if (r.totals.uaf_hits > 0)
    r.outcome = Outcome::UafDetected;
  else
    r.outcome = Outcome::Completed;
  return r;
}

RunReport run_churn_scripted(const ChurnConfig& cfg) {
  ChurnSim sim(cfg);
  SimWorld& w = sim.world;

  for (std::uint32_t i = 0; i < cfg.reader_count; ++i) {
    w.sched.add_actor("reader" + std::to_string(i),
                      churn_reader(sim, splitmix64(cfg.seed ^ (0x1000 + i))));
  }
  w.sched.add_actor("enable", churn_writer_up(sim));
  w.sched.add_actor("disable", churn_writer_down(sim));
  if (cfg.grace_driver_period > 0)
    w.sched.add_actor("grace_driver", churn_grace_driver(sim));
  if (cfg.backlog_hold_ticks > 0)
    w.sched.add_actor("backlog_reader", churn_backlog_reader(sim));

  sim.snapshot_now();
  w.sched.run(SchedulePolicy::random(splitmix64(cfg.seed)));

  return finalize_report(sim, std::min(sim.progress_up, sim.progress_down));
}

// ---------------------------------------------------------------------------
// Live churn
// ---------------------------------------------------------------------------

struct LiveCounters {
  std::atomic<std::uint64_t> clean_hits{0};
  std::atomic<std::uint64_t> clean_misses{0};
  std::atomic<std::uint64_t> torn_reads{0};
};

RunReport run_churn_live(const ChurnConfig& cfg) {
  SteadyClock clock;
  RcuDomain domain(RcuDomain::kDefaultMaxReaders, &clock);
  BuddyAllocator allocator(cfg.arena_pages);
  RcuHashTable table(cfg.bucket_count, HashConfig{}, &clock);
  EventLog log;
  VfManager manager(table, allocator, domain, cfg.policy, VfFootprintSpec::standard(),
                    cfg.max_vfs, log, &clock);
  if (cfg.backlog_hold_ticks > 0) manager.set_backlog_divert(true);
  pin_reserved_pages(allocator, cfg.reserved_pages);

  std::atomic<bool> stop{false};
  LiveCounters counters;
  std::vector<MemSnapshot> snapshots;
  snapshots.push_back(take_snapshot(manager, domain, clock));

  std::vector<std::thread> readers;
  for (std::uint32_t i = 0; i < cfg.reader_count; ++i) {
    readers.emplace_back([&, i] {
      ReaderHandle handle = domain.register_reader();
      std::mt19937_64 rng(splitmix64(cfg.seed ^ (0x2000 + i)));
      while (!stop.load()) {
        std::uint64_t key = rng() % cfg.vfs_per_cycle;
        ReadGuard guard = domain.read_enter(handle);
        LookupResult r = table.lookup(key, guard);
        if (r.found()) {
          if (r.entry->key != key) counters.torn_reads.fetch_add(1);
          counters.clean_hits.fetch_add(1);
        } else {
          counters.clean_misses.fetch_add(1);
        }
        guard.exit();
      }
    });
  }

  std::thread driver;
  if (cfg.grace_driver_period > 0) {
    driver = std::thread([&] {
      while (!stop.load()) {
        std::this_thread::sleep_for(std::chrono::microseconds(cfg.grace_driver_period));
        domain.advance_grace_period();
      }
    });
  }

  std::thread backlog;
  if (cfg.backlog_hold_ticks > 0) {
    backlog = std::thread([&] {
      ReaderHandle handle = domain.register_reader();
      while (!stop.load()) {
        ReadGuard guard = domain.read_enter(handle);
        std::this_thread::sleep_for(std::chrono::microseconds(cfg.backlog_hold_ticks));
        guard.exit();
        std::this_thread::yield();
      }
    });
  }

  std::optional<OomEvent> first_oom;
  bool oom_panic = false;
  std::uint64_t completed = 0;
  std::mt19937_64 writer_rng(splitmix64(cfg.seed ^ 0x3000));
  for (std::uint32_t it = 0; it < cfg.iterations; ++it) {
    bool up_first = (writer_rng() & 1) != 0;
    std::optional<OomEvent> oom;
    if (up_first) {
      oom = manager.set_num_vfs(cfg.vfs_per_cycle);
      if (!oom) manager.set_num_vfs(0);
    } else {
      manager.set_num_vfs(0);
      oom = manager.set_num_vfs(cfg.vfs_per_cycle);
    }
    if (oom && !first_oom) {
      first_oom = oom;
      first_oom->iteration = it + 1;
    }
    if (oom && cfg.panic_on_oom) {
      oom_panic = true;
      break;
    }
    completed = it + 1;
    if ((it + 1) % cfg.snapshot_every == 0)
      snapshots.push_back(take_snapshot(manager, domain, clock));
  }

  stop.store(true);
  for (auto& t : readers) t.join();
  if (driver.joinable()) driver.join();
  if (backlog.joinable()) backlog.join();

  if (!oom_panic) {
    while (manager.num_vfs() > 0) {
      EntryRecord* e = manager.unlink_vf(manager.highest_live_key());
      manager.apply_reclamation(e);
    }
    while (domain.callbacks_pending() > 0) domain.advance_grace_period();
  }
  snapshots.push_back(take_snapshot(manager, domain, clock));

  RunReport r;
  r.config = cfg;
  r.totals = log.tally();
  r.totals.clean_hits = counters.clean_hits.load();
  r.totals.clean_misses = counters.clean_misses.load();
  r.torn_reads = counters.torn_reads.load();
  r.grace_periods = domain.grace_periods_completed();
  r.completed_iterations = completed;
  r.snapshots = std::move(snapshots);
  r.first_oom = first_oom;
  if (oom_panic)
    r.outcome = Outcome::OomPanic;
  else if (r.totals.uaf_hits > 0)
    r.outcome = Outcome::UafDetected;
  else
    r.outcome = Outcome::Completed;
  return r;
}

}  // namespace

RunReport run_churn(const ChurnConfig& cfg) {
  cfg.validate();
  return cfg.mode == RunMode::Scripted ? run_churn_scripted(cfg) : run_churn_live(cfg);
}

// ---------------------------------------------------------------------------
// Timing probe
// ---------------------------------------------------------------------------

namespace {

struct TimingSim {
  TimingConfig cfg;
  SimWorld world;
  EntryRecord* target = nullptr;
  bool unlink_requested = false;
  bool unlink_done = false;
  std::vector<TimingSample> samples;

  explicit TimingSim(const TimingConfig& c)
      : cfg(c),
        world(c.arena_pages, 8, HashConfig{HashConfig::Mode::Identity, 0}, c.policy,
              VfFootprintSpec::standard(), 8) {}

  // The phase comes from the entry's recorded unlink/free times, not from
  // what the probe thinks it just did.
  TimingSample make_sample(std::uint32_t cost, bool found, bool stale_path) {
    TimingSample s;
    s.key = 0;
    s.traversal_cost = cost;
    s.tick = world.sched.now();
    s.unlink_time = target->unlink_time.load();
    s.free_time = target->free_time.load();
    if (s.unlink_time == kNoTime)
      s.phase = TimingPhase::Occupied;
    else if (s.free_time == kNoTime)
      s.phase = TimingPhase::PostUnlinkPreFree;
    else
      s.phase = TimingPhase::PostFree;
    s.found = found;
    s.via_stale_path = stale_path;
    return s;
  }
};

Actor timing_sampler(TimingSim& sim) {
  SimWorld& w = sim.world;
  ReaderHandle handle = w.domain.register_reader();

  // Phase 1: occupied cost from a fresh section.
  {
    ReadGuard guard = w.domain.read_enter(handle);
    LookupCursor cur = w.table.lookup_begin(0);
    for (;;) {
      bool more = cur.advance();
      if (cur.visited()) w.classify_visit(cur.visited(), guard);
      if (!more) break;
      co_await w.sched.yield();
    }
    sim.samples.push_back(
        sim.make_sample(cur.traversal_cost(), cur.found() != nullptr, false));
    guard.exit();
  }

  // Phase 2: stale path. Capture the walk position, let the unlink land,
  // then finish the walk through the unlinked node.
  {
    ReadGuard guard = w.domain.read_enter(handle);
    LookupCursor cur = w.table.lookup_begin(0);
    for (unsigned i = 0; i < sim.cfg.chain_position; ++i) {
      cur.advance();
      if (cur.visited()) w.classify_visit(cur.visited(), guard);
      co_await w.sched.yield();
    }
    sim.unlink_requested = true;
    co_await w.sched.wait_until([&] { return sim.unlink_done; });
    for (;;) {
      bool more = cur.advance();
      if (cur.visited()) w.classify_visit(cur.visited(), guard);
      if (!more) break;
      co_await w.sched.yield();
    }
    sim.samples.push_back(
        sim.make_sample(cur.traversal_cost(), cur.found() != nullptr, true));
    guard.exit();
  }

  // Phase 2b: cost seen by a section that began after the unlink.
  {
    ReadGuard guard = w.domain.read_enter(handle);
    LookupResult r = w.table.lookup(0, guard);
    sim.samples.push_back(sim.make_sample(r.traversal_cost, r.found(), false));
    guard.exit();
  }

  // Phase 3: after reclamation.
  co_await w.sched.wait_until([&] { return sim.target->state.load() == Lifecycle::Freed; });
  {
    ReadGuard guard = w.domain.read_enter(handle);
    LookupResult r = w.table.lookup(0, guard);
    sim.samples.push_back(sim.make_sample(r.traversal_cost, r.found(), false));
    guard.exit();
  }
  w.stop = true;
}

Actor timing_unlinker(TimingSim& sim) {
  SimWorld& w = sim.world;
  co_await w.sched.wait_until([&] { return sim.unlink_requested; });
  EntryRecord* e = w.manager.unlink_vf(0);
  w.manager.enqueue_deferred_release(e);
  sim.unlink_done = true;
}

Actor timing_driver(TimingSim& sim) {
  SimWorld& w = sim.world;
  Tick next = sim.cfg.grace_driver_period;
  while (!w.stop) {
    co_await w.sched.wait_time(next);
    if (w.stop) break;
    w.domain.advance_grace_period();
    next += sim.cfg.grace_driver_period;
  }
}

}  // namespace

TimingProbeResult run_timing_probe(const TimingConfig& cfg) {
  if (cfg.policy.effective() != PolicyKind::CallRcu)
    throw Error(Errc::ConfigError,
                "timing probe needs a deferred policy with a nonzero stale window");
  if (cfg.grace_driver_period == 0)
    throw Error(Errc::ConfigError, "timing probe needs a grace driver period");
  if (cfg.chain_position < 1 || cfg.chain_position > 2)
    throw Error(Errc::ConfigError, "chain_position must be 1 or 2");

  TimingSim sim(cfg);
  SimWorld& w = sim.world;
  // Identity hash: key 0 and key 8 share bucket 0 of 8. Publishing 8 after 0
  // puts the target second in the chain.
  w.manager.create_vf(0);
  if (cfg.chain_position == 2) w.manager.create_vf(8);
  {
    ReaderHandle h = w.domain.register_reader();
    ReadGuard g = w.domain.read_enter(h);
    sim.target = w.table.lookup(0, g).entry;
    g.exit();
  }

  w.sched.add_actor("sampler", timing_sampler(sim));
  w.sched.add_actor("unlinker", timing_unlinker(sim));
  w.sched.add_actor("grace_driver", timing_driver(sim));
  w.sched.run(SchedulePolicy::first_runnable());

  TimingProbeResult result;
  result.samples = std::move(sim.samples);
  result.unlink_time = sim.target->unlink_time.load();
  result.free_time = sim.target->free_time.load();
  return result;
}

std::string timing_csv(const TimingProbeResult& result) {
  std::ostringstream out;
  out << "key,phase,traversal_cost,tick,unlink_time,free_time,found,via_stale_path\n";
  for (const auto& s : result.samples) {
    out << s.key << ',' << timing_phase_name(s.phase) << ',' << s.traversal_cost << ','
        << s.tick << ',';
    if (s.unlink_time != kNoTime) out << s.unlink_time;
    out << ',';
    if (s.free_time != kNoTime) out << s.free_time;
    out << ',' << (s.found ? 1 : 0) << ',' << (s.via_stale_path ? 1 : 0) << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Bounded interleaving exploration
// ---------------------------------------------------------------------------

namespace {

struct ExploreSim {
  ChurnConfig cfg;
  SimWorld world;
  std::vector<std::pair<Tick, Tick>> sections;  // reader [enter, exit) intervals

  explicit ExploreSim(const ChurnConfig& c)
      : cfg(c),
        world(64, 8, HashConfig{HashConfig::Mode::Identity, 0}, c.policy,
              VfFootprintSpec::standard(), 4) {
    world.manager.create_vf(0);
  }

  // Safety ordering: the entry may not become Freed while a section that
  // began before its unlink is still open.
  bool free_landed_inside_straddling_section() const {
    const EntryRecord* e = world.manager.entries()[0];
    Tick unlink = e->unlink_time.load();
    Tick freed = e->free_time.load();
    if (unlink == kNoTime || freed == kNoTime) return false;
    for (const auto& [enter, exit] : sections) {
      if (enter < unlink && enter <= freed && freed < exit) return true;
    }
    return false;
  }
};

Actor explore_reader(ExploreSim& sim) {
  SimWorld& w = sim.world;
  ReaderHandle handle = w.domain.register_reader();
  ReadGuard guard = w.domain.read_enter(handle);
  Tick entered = w.sched.now();
  LookupCursor cur = w.table.lookup_begin(0);
  for (;;) {
    bool more = cur.advance();
    if (cur.visited()) w.classify_visit(cur.visited(), guard);
    if (!more) break;
    co_await w.sched.yield();
  }
  if (cur.found()) {
    co_await w.sched.yield();  // the reference outlives this interleaving point
    if (w.classify_visit(cur.found(), guard) == ReadClass::CleanHit) ++w.clean_hits;
  } else {
    w.record_miss();
  }
  guard.exit();
  sim.sections.emplace_back(entered, w.sched.now());
}

Actor explore_destroyer(ExploreSim& sim) {
  SimWorld& w = sim.world;
  const PolicyKind kind = sim.cfg.policy.effective();
  EntryRecord* entry = w.manager.unlink_vf(0);
  co_await w.sched.yield();  // the stale window
  if (kind == PolicyKind::SynchronizeRcu) {
    GraceWait gw(w.domain);
    while (!gw.done()) {
      co_await w.sched.wait_until([&] { return gw.done() || w.domain.can_advance(); });
      if (!gw.done()) w.domain.advance_grace_period();
    }
    w.manager.release_footprint(entry);
  } else if (kind == PolicyKind::CallRcu) {
    w.manager.enqueue_deferred_release(entry);
  } else {
    w.manager.release_footprint(entry);
  }
}

Actor explore_grace_driver(ExploreSim& sim) {
  SimWorld& w = sim.world;
  // Bounded driver: enough attempts for two epoch advances plus slack.
  for (int i = 0; i < 4; ++i) {
    if (w.domain.callbacks_pending() == 0 && i > 0) break;
    co_await w.sched.wait_until([&] { return w.domain.can_advance(); });
    w.domain.advance_grace_period();
  }
}

std::unique_ptr<ExploreSim> make_explore_sim(const ChurnConfig& cfg) {
  auto sim = std::make_unique<ExploreSim>(cfg);
  std::uint32_t readers = std::min<std::uint32_t>(cfg.reader_count, 2);
  for (std::uint32_t i = 0; i < readers; ++i)
    sim->world.sched.add_actor("reader" + std::to_string(i), explore_reader(*sim));
  sim->world.sched.add_actor("destroyer", explore_destroyer(*sim));
  if (cfg.policy.effective() == PolicyKind::CallRcu)
    sim->world.sched.add_actor("grace_driver", explore_grace_driver(*sim));
  return sim;
}

RunReport explore_report_from(ExploreSim& sim) {
  SimWorld& w = sim.world;
  if (!w.table.audit_unreachable(w.manager.entries()).empty())
    throw std::logic_error("audit: a non-published entry is still reachable");
  RunReport r;
  r.config = sim.cfg;
  r.totals = w.log.tally();
  r.totals.clean_hits = w.clean_hits;
  r.totals.clean_misses = w.clean_misses;
  r.grace_periods = w.domain.grace_periods_completed();
  r.completed_iterations = 0;
  r.snapshots.push_back(take_snapshot(w.manager, w.domain, w.sched.clock()));
  r.outcome = r.totals.uaf_hits > 0 ? Outcome::UafDetected : Outcome::Completed;
  return r;
}

}  // namespace

ExploreReport explore_uaf_schedules(const ChurnConfig& cfg, const ExploreBounds& bounds) {
  const PolicyKind kind = cfg.policy.effective();
  auto run_one = [&cfg, &bounds, kind](const std::vector<int>& prefix) -> ExploreRun {
    auto sim = make_explore_sim(cfg);
    ExploreRun out;
    out.record = sim->world.sched.run(SchedulePolicy::from_trace(prefix),
                                      [&] { return sim->world.uaf_count > 0; },
                                      bounds.max_steps_per_run);
    out.violated = sim->world.uaf_count > 0;
    // Grace-protected policies must never free under a straddling section,
    // on any schedule whatsoever.
    if ((kind == PolicyKind::SynchronizeRcu || kind == PolicyKind::CallRcu) &&
        sim->free_landed_inside_straddling_section())
      throw std::logic_error("grace-period safety violated by a schedule");
    return out;
  };
  ExploreResult res = explore_interleavings(run_one, bounds);

  ExploreReport report;
  report.found = res.found;
  report.exhausted = res.exhausted;
  report.runs = res.runs;
  report.schedule = res.schedule;
  if (res.found) report.violating_report = replay_explore_schedule(cfg, res.schedule);
  return report;
}

RunReport replay_explore_schedule(const ChurnConfig& cfg, const std::vector<int>& steps) {
  auto sim = make_explore_sim(cfg);
  sim->world.sched.run(SchedulePolicy::from_trace(steps),
                       [&] { return sim->world.uaf_count > 0; },
                       static_cast<long>(steps.size()));
  return explore_report_from(*sim);
}

// ---------------------------------------------------------------------------
// Fragmentation scenarios
// ---------------------------------------------------------------------------

FragSeries run_frag_scenario(const std::string& pattern, std::uint32_t pages,
                             std::uint64_t seed) {
  BuddyAllocator allocator(pages);
  FragSeries series;
  auto snap = [&](const std::string& label) {
    series.labels.push_back(label);
    series.reports.push_back(allocator.frag_report());
  };

  if (pattern == "alternating") {
    snap("initial");
    std::vector<BlockRef> blocks;
    for (std::uint32_t i = 0; i < pages; ++i)
      blocks.push_back(std::get<BlockRef>(allocator.alloc(0, false)));
    snap("fully_allocated");
    for (std::uint32_t i = 0; i < pages; i += 2) allocator.free(blocks[i]);
    snap("after_free_even");
    AllocResult r = allocator.alloc(1, false);
    if (alloc_ok(r)) allocator.free(std::get<BlockRef>(r));
    snap("after_order1_attempt");
    return series;
  }

  if (pattern == "churn") {
    std::mt19937_64 rng(seed);
    std::vector<BlockRef> live;
    snap("initial");
    for (int op = 1; op <= 300; ++op) {
      bool do_alloc = live.empty() || (rng() & 1) != 0;
      if (do_alloc) {
        unsigned order = static_cast<unsigned>(rng() % 4);
        AllocResult r = allocator.alloc(order, false);
        if (alloc_ok(r)) live.push_back(std::get<BlockRef>(r));
      } else {
        size_t idx = static_cast<size_t>(rng() % live.size());
        allocator.free(live[idx]);
        live[idx] = live.back();
        live.pop_back();
      }
      if (op % 50 == 0) snap("op_" + std::to_string(op));
    }
    snap("final");
    return series;
  }

  throw Error(Errc::ConfigError, "unknown frag pattern '" + pattern + "'");
}

std::string frag_csv(const FragSeries& series) {
  std::ostringstream out;
  unsigned max_order = 0;
  for (const auto& r : series.reports)
    max_order = std::max<unsigned>(max_order,
                                   static_cast<unsigned>(r.per_order_free.size()) - 1);
  out << "label,free_pages,highest_allocatable_order";
  for (unsigned k = 0; k <= max_order; ++k) out << ",order_" << k;
  out << "\n";
  for (size_t i = 0; i < series.reports.size(); ++i) {
    const auto& r = series.reports[i];
    out << csv_quote(series.labels[i]) << ',' << r.free_pages << ','
        << r.highest_allocatable_order;
    for (unsigned k = 0; k <= max_order; ++k)
      out << ',' << (k < r.per_order_free.size() ? r.per_order_free[k] : 0);
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

ReplayResult replay_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ReplayResult result;
  if (j.contains("schema") && j.at("schema") == "rcu-lab/schedule/1") {
    ScheduleArtifact a = artifact_from_json(text);
    result.report = replay_explore_schedule(a.config, a.steps);
    result.kind = a.scenario;
    return result;
  }
  if (j.contains("schema") && j.at("schema") == "rcu-lab/1") {
    RunReport original = parse_report(text);
    result.report = run_churn(original.config);
    result.kind = "churn";
    return result;
  }
  if (j.contains("policy")) {  // bare config
    result.report = run_churn(config_from_json_string(text));
    result.kind = "churn";
    return result;
  }
  throw Error(Errc::ConfigError, "unrecognized replay input");
}

}  // namespace rculab
