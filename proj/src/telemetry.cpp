#include "rculab/telemetry.hpp"

#include <sstream>

#include <json.hpp>

#include "rculab/harness.hpp"

namespace rculab {

using nlohmann::json;

MemSnapshot take_snapshot(const VfManager& manager, const RcuDomain& domain,
                          const Clock& clock) {
  VfManager::TelemetryView v = manager.telemetry_view();
  MemSnapshot s;
  s.timestamp = clock.now();
  s.free_pages = v.allocator_free_pages;
  s.per_order_free = std::move(v.per_order_free);
  s.slab_analog_pages = v.live_pages;
  s.sunreclaim_analog_pages = v.unreclaimed_pages;
  s.num_vfs = v.num_vfs;
  s.grace_periods_completed = domain.grace_periods_completed();
  s.callbacks_pending = domain.callbacks_pending();
  s.other_allocated_pages =
      static_cast<std::int64_t>(v.allocator_allocated_pages) -
      static_cast<std::int64_t>(v.live_pages + v.unreclaimed_pages);
  s.total_pages = v.total_pages;
  return s;
}

namespace {

json snapshot_to_json(const MemSnapshot& s) {
  return json{{"callbacks_pending", s.callbacks_pending},
              {"free_pages", s.free_pages},
              {"grace_periods_completed", s.grace_periods_completed},
              {"num_vfs", s.num_vfs},
              {"other_allocated_pages", s.other_allocated_pages},
              {"per_order_free", s.per_order_free},
              {"slab_analog_pages", s.slab_analog_pages},
              {"sunreclaim_analog_pages", s.sunreclaim_analog_pages},
              {"timestamp", s.timestamp},
              {"total_pages", s.total_pages}};
}

MemSnapshot snapshot_from_json(const json& j) {
  MemSnapshot s;
  s.callbacks_pending = j.at("callbacks_pending").get<std::uint64_t>();
  s.free_pages = j.at("free_pages").get<std::uint64_t>();
  s.grace_periods_completed = j.at("grace_periods_completed").get<std::uint64_t>();
  s.num_vfs = j.at("num_vfs").get<std::uint32_t>();
  s.other_allocated_pages = j.at("other_allocated_pages").get<std::int64_t>();
  s.per_order_free = j.at("per_order_free").get<std::vector<std::uint64_t>>();
  s.slab_analog_pages = j.at("slab_analog_pages").get<std::uint64_t>();
  s.sunreclaim_analog_pages = j.at("sunreclaim_analog_pages").get<std::uint64_t>();
  s.timestamp = j.at("timestamp").get<Tick>();
  s.total_pages = j.at("total_pages").get<std::uint64_t>();
  return s;
}

json frag_to_json(const FragReport& f) {
  return json{{"free_pages", f.free_pages},
              {"highest_allocatable_order", f.highest_allocatable_order},
              {"per_order_free", f.per_order_free}};
}

FragReport frag_from_json(const json& j) {
  FragReport f;
  f.free_pages = j.at("free_pages").get<std::uint64_t>();
  f.highest_allocatable_order = j.at("highest_allocatable_order").get<int>();
  f.per_order_free = j.at("per_order_free").get<std::vector<std::uint64_t>>();
  return f;
}

json oom_to_json(const OomEvent& o) {
  return json{{"frag", frag_to_json(o.report)},
              {"iteration", o.iteration},
              {"requested_order", o.requested_order},
              {"tick", o.tick}};
}

OomEvent oom_from_json(const json& j) {
  OomEvent o;
  o.report = frag_from_json(j.at("frag"));
  o.iteration = j.at("iteration").get<std::uint64_t>();
  o.requested_order = j.at("requested_order").get<unsigned>();
  o.tick = j.at("tick").get<Tick>();
  return o;
}

json config_to_json(const ChurnConfig& c) {
  return json{{"arena_pages", c.arena_pages},
              {"backlog_hold_ticks", c.backlog_hold_ticks},
              {"bucket_count", c.bucket_count},
              {"grace_driver_period", c.grace_driver_period},
              {"iterations", c.iterations},
              {"max_vfs", c.max_vfs},
              {"mode", run_mode_name(c.mode)},
              {"panic_on_oom", c.panic_on_oom},
              {"policy", c.policy.name()},
              {"policy_burst", c.policy.burst},
              {"policy_inner", ReclamationPolicy{c.policy.inner}.name()},
              {"policy_rate", c.policy.rate_per_second},
              {"reader_count", c.reader_count},
              {"reserved_pages", c.reserved_pages},
              {"seed", c.seed},
              {"snapshot_every", c.snapshot_every},
              {"vfs_per_cycle", c.vfs_per_cycle}};
}

ChurnConfig config_from_json(const json& j) {
  ChurnConfig c;
  c.arena_pages = j.at("arena_pages").get<std::uint32_t>();
  c.backlog_hold_ticks = j.at("backlog_hold_ticks").get<Tick>();
  c.bucket_count = j.at("bucket_count").get<std::uint32_t>();
  c.grace_driver_period = j.at("grace_driver_period").get<Tick>();
  c.iterations = j.at("iterations").get<std::uint32_t>();
  c.max_vfs = j.at("max_vfs").get<std::uint32_t>();
  c.mode = run_mode_from_name(j.at("mode").get<std::string>());
  c.panic_on_oom = j.at("panic_on_oom").get<bool>();
  c.policy = ReclamationPolicy::from_name(j.at("policy").get<std::string>());
  c.policy.burst = j.at("policy_burst").get<std::uint32_t>();
  c.policy.inner = ReclamationPolicy::from_name(j.at("policy_inner").get<std::string>()).kind;
  c.policy.rate_per_second = j.at("policy_rate").get<std::uint32_t>();
  c.reader_count = j.at("reader_count").get<std::uint32_t>();
  c.reserved_pages = j.at("reserved_pages").get<std::uint32_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.snapshot_every = j.at("snapshot_every").get<std::uint32_t>();
  c.vfs_per_cycle = j.at("vfs_per_cycle").get<std::uint32_t>();
  return c;
}

json totals_to_json(const RunReport& r) {
  return json{{"clean_hits", r.totals.clean_hits},
              {"clean_misses", r.totals.clean_misses},
              {"creates", r.totals.creates},
              {"frees", r.totals.frees},
              {"grace_periods", r.grace_periods},
              {"oom_events", r.totals.oom_events},
              {"stale_hits", r.totals.stale_hits},
              {"torn_reads", r.torn_reads},
              {"uaf_hits", r.totals.uaf_hits},
              {"unlinks", r.totals.unlinks}};
}

json timing_to_json(const TimingSample& t) {
  return json{{"found", t.found},
              {"free_time", t.free_time == kNoTime ? json(nullptr) : json(t.free_time)},
              {"key", t.key},
              {"phase", timing_phase_name(t.phase)},
              {"tick", t.tick},
              {"traversal_cost", t.traversal_cost},
              {"unlink_time", t.unlink_time == kNoTime ? json(nullptr) : json(t.unlink_time)},
              {"via_stale_path", t.via_stale_path}};
}

TimingSample timing_from_json(const json& j) {
  TimingSample t;
  t.found = j.at("found").get<bool>();
  t.free_time = j.at("free_time").is_null() ? kNoTime : j.at("free_time").get<Tick>();
  t.key = j.at("key").get<std::uint64_t>();
  const std::string phase = j.at("phase").get<std::string>();
  if (phase == "occupied")
    t.phase = TimingPhase::Occupied;
  else if (phase == "post_unlink_pre_free")
    t.phase = TimingPhase::PostUnlinkPreFree;
  else
    t.phase = TimingPhase::PostFree;
  t.tick = j.at("tick").get<Tick>();
  t.traversal_cost = j.at("traversal_cost").get<std::uint32_t>();
  t.unlink_time = j.at("unlink_time").is_null() ? kNoTime : j.at("unlink_time").get<Tick>();
  t.via_stale_path = j.at("via_stale_path").get<bool>();
  return t;
}

}  // namespace

std::string emit_json(const RunReport& report) {
  json snapshots = json::array();
  for (const auto& s : report.snapshots) snapshots.push_back(snapshot_to_json(s));
  json timing = json::array();
  for (const auto& t : report.timing) timing.push_back(timing_to_json(t));

  json j{{"completed_iterations", report.completed_iterations},
         {"config", config_to_json(report.config)},
         {"events", totals_to_json(report)},
         {"oom", report.first_oom ? oom_to_json(*report.first_oom) : json(nullptr)},
         {"outcome", outcome_name(report.outcome)},
         {"schema", "rcu-lab/1"},
         {"snapshots", snapshots},
         {"timing", timing}};
  return j.dump();
}

RunReport parse_report(const std::string& json_text) {
  json j = json::parse(json_text);
  if (j.at("schema").get<std::string>() != "rcu-lab/1")
    throw Error(Errc::ConfigError, "unrecognized report schema");
  RunReport r;
  r.completed_iterations = j.at("completed_iterations").get<std::uint64_t>();
  r.config = config_from_json(j.at("config"));
  const json& ev = j.at("events");
  r.totals.clean_hits = ev.at("clean_hits").get<std::uint64_t>();
  r.totals.clean_misses = ev.at("clean_misses").get<std::uint64_t>();
  r.totals.creates = ev.at("creates").get<std::uint64_t>();
  r.totals.frees = ev.at("frees").get<std::uint64_t>();
  r.grace_periods = ev.at("grace_periods").get<std::uint64_t>();
  r.totals.oom_events = ev.at("oom_events").get<std::uint64_t>();
  r.totals.stale_hits = ev.at("stale_hits").get<std::uint64_t>();
  r.torn_reads = ev.at("torn_reads").get<std::uint64_t>();
  r.totals.uaf_hits = ev.at("uaf_hits").get<std::uint64_t>();
  r.totals.unlinks = ev.at("unlinks").get<std::uint64_t>();
  if (!j.at("oom").is_null()) r.first_oom = oom_from_json(j.at("oom"));
  r.outcome = outcome_from_name(j.at("outcome").get<std::string>());
  for (const auto& s : j.at("snapshots")) r.snapshots.push_back(snapshot_from_json(s));
  for (const auto& t : j.at("timing")) r.timing.push_back(timing_from_json(t));
  return r;
}

std::string csv_quote(const std::string& field) {
  bool needs = field.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

std::string emit_csv(std::span<const MemSnapshot> snapshots, unsigned max_order) {
  std::ostringstream out;
  out << "timestamp,free_pages,slab,sunreclaim,num_vfs";
  for (unsigned k = 0; k <= max_order; ++k) out << ",order_" << k;
  out << "\n";
  for (const auto& s : snapshots) {
    out << s.timestamp << ',' << s.free_pages << ',' << s.slab_analog_pages << ','
        << s.sunreclaim_analog_pages << ',' << s.num_vfs;
    for (unsigned k = 0; k <= max_order; ++k) {
      out << ',' << (k < s.per_order_free.size() ? s.per_order_free[k] : 0);
    }
    out << "\n";
  }
  return out.str();
}

std::string config_to_json_string(const ChurnConfig& cfg) {
  return config_to_json(cfg).dump();
}

ChurnConfig config_from_json_string(const std::string& text) {
  return config_from_json(json::parse(text));
}

std::string artifact_to_json(const ScheduleArtifact& a) {
  json j{{"config", config_to_json(a.config)},
         {"scenario", a.scenario},
         {"schema", "rcu-lab/schedule/1"},
         {"steps", a.steps}};
  return j.dump();
}

ScheduleArtifact artifact_from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.at("schema").get<std::string>() != "rcu-lab/schedule/1")
    throw Error(Errc::ConfigError, "unrecognized schedule schema");
  ScheduleArtifact a;
  a.config = config_from_json(j.at("config"));
  a.scenario = j.at("scenario").get<std::string>();
  a.steps = j.at("steps").get<std::vector<int>>();
  return a;
}

}  // namespace rculab
