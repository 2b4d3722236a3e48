#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rculab/events.hpp"
#include "rculab/hash_table.hpp"
#include "rculab/sched.hpp"
#include "rculab/telemetry.hpp"
#include "rculab/vf_manager.hpp"

namespace rculab {

enum class RunMode : std::uint8_t { Scripted, Live };
enum class Outcome : std::uint8_t { Completed, OomPanic, UafDetected };

const char* run_mode_name(RunMode m);
const char* outcome_name(Outcome o);
RunMode run_mode_from_name(const std::string& s);
Outcome outcome_from_name(const std::string& s);

struct ChurnConfig {
  std::uint32_t vfs_per_cycle = 64;
  std::uint32_t iterations = 10;
  ReclamationPolicy policy = ReclamationPolicy::immediate();
  std::uint32_t reader_count = 2;
  std::uint32_t arena_pages = 4096;
  std::uint64_t seed = 1;
  RunMode mode = RunMode::Scripted;
  bool panic_on_oom = false;
  std::uint32_t snapshot_every = 1;
  Tick grace_driver_period = 0;   // 0: no grace driver
  Tick backlog_hold_ticks = 0;    // 0: no deferred-backlog injection
  std::uint32_t bucket_count = 64;
  std::uint32_t max_vfs = 64;
  // Pages pinned at the arena base before the run, like boot-time reserved
  // memory. A count that is not a multiple of the VF footprint knocks every
  // later allocation off the clean alignment lattice, which is what lets
  // fragmentation take hold.
  std::uint32_t reserved_pages = 0;

  void validate() const;  // Errc::ConfigError
};

// --- read classification (the shadow checker) ---

enum class ReadClass : std::uint8_t { CleanHit, CleanMiss, StaleHit, UafHit };

const char* read_class_name(ReadClass c);

// Classification of one dereference from the entry's shadow state. An
// Unlinked entry can only be reached by a section that began before the
// unlink; the checker enforces that as a structural invariant.
ReadClass classify_read(Lifecycle state_at_deref, Tick section_start, Tick unlink_time);

// --- timing probe ---

enum class TimingPhase : std::uint8_t { Occupied, PostUnlinkPreFree, PostFree };

const char* timing_phase_name(TimingPhase p);

struct TimingSample {
  std::uint64_t key = 0;
  TimingPhase phase = TimingPhase::Occupied;
  std::uint32_t traversal_cost = 0;
  Tick tick = 0;
  Tick unlink_time = kNoTime;
  Tick free_time = kNoTime;
  bool found = false;
  bool via_stale_path = false;  // walked from a pointer captured before unlink
};

struct TimingConfig {
  ReclamationPolicy policy = ReclamationPolicy::call_rcu();
  Tick grace_driver_period = 10;
  unsigned chain_position = 1;  // 1: alone in its bucket, 2: second in a 2-chain
  std::uint32_t arena_pages = 64;
};

struct TimingProbeResult {
  std::vector<TimingSample> samples;
  Tick unlink_time = kNoTime;
  Tick free_time = kNoTime;
};

TimingProbeResult run_timing_probe(const TimingConfig& cfg);
std::string timing_csv(const TimingProbeResult& result);

// --- run report ---

struct RunReport {
  ChurnConfig config;
  Outcome outcome = Outcome::Completed;
  EventTotals totals;
  std::uint64_t grace_periods = 0;
  std::uint64_t torn_reads = 0;  // live mode only; must stay 0
  std::uint64_t completed_iterations = 0;
  std::vector<MemSnapshot> snapshots;
  std::vector<TimingSample> timing;
  std::optional<OomEvent> first_oom;
};

RunReport run_churn(const ChurnConfig& cfg);

// --- bounded interleaving exploration ---

struct ExploreReport {
  bool found = false;
  bool exhausted = false;
  long runs = 0;
  std::vector<int> schedule;
  RunReport violating_report;  // meaningful when found
};

// Minimal scenario derived from cfg: one published VF, cfg.reader_count
// (capped at 2) single-lookup readers, one destroyer under cfg.policy, plus a
// grace driver when the policy defers. Every actor stays within 8 yields.
ExploreReport explore_uaf_schedules(const ChurnConfig& cfg, const ExploreBounds& bounds = {});

RunReport replay_explore_schedule(const ChurnConfig& cfg, const std::vector<int>& steps);

struct ScheduleArtifact {
  std::string scenario = "explore-uaf";
  ChurnConfig config;
  std::vector<int> steps;
};

// --- fragmentation scenarios (CLI `frag`) ---

struct FragSeries {
  std::vector<std::string> labels;  // one per report, e.g. "after_free_even"
  std::vector<FragReport> reports;
};

FragSeries run_frag_scenario(const std::string& pattern, std::uint32_t pages,
                             std::uint64_t seed);
std::string frag_csv(const FragSeries& series);

// --- replay entry point (CLI `replay`) ---

struct ReplayResult {
  RunReport report;
  std::string kind;  // "churn" or the artifact scenario name
};

ReplayResult replay_from_json(const std::string& text);

// --- scripted world for custom scenarios (tests compose their own actors) ---

struct SimWorld {
  Scheduler sched;
  RcuDomain domain;
  BuddyAllocator allocator;
  RcuHashTable table;
  EventLog log;
  VfManager manager;

  bool stop = false;
  std::uint64_t uaf_count = 0;
  std::uint64_t stale_count = 0;
  std::uint64_t clean_hits = 0;
  std::uint64_t clean_misses = 0;

  SimWorld(std::uint32_t arena_pages, std::uint32_t buckets, HashConfig hash,
           ReclamationPolicy policy, VfFootprintSpec footprint, std::uint32_t max_vfs);
  // Actor frames can hold guards into the domain; tear them down first.
  ~SimWorld() { sched.shutdown(); }

  // Shadow-checked dereference of a visited node.
  ReadClass classify_visit(EntryRecord* entry, const ReadGuard& guard);
  // Account a completed lookup that found nothing.
  void record_miss();
};

// JSON converters shared by reports and artifacts (defined with telemetry).
std::string config_to_json_string(const ChurnConfig& cfg);
ChurnConfig config_from_json_string(const std::string& text);
std::string artifact_to_json(const ScheduleArtifact& a);
ScheduleArtifact artifact_from_json(const std::string& text);

}  // namespace rculab
