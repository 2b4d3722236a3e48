#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rculab/harness.hpp"
#include "rculab/svg.hpp"
#include "rculab/telemetry.hpp"

namespace {

using namespace rculab;

constexpr int kExitUsage = 64;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ConfigError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::ConfigError, "cannot write " + path);
  out << data;
}

int exit_code_for(Outcome o) {
  switch (o) {
    case Outcome::Completed: return 0;
    case Outcome::OomPanic: return 2;
    case Outcome::UafDetected: return 3;
  }
  return 0;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("RCU_LAB_SEED")) return std::strtoull(env, nullptr, 10);
  return 1;
}

void print_summary(const RunReport& r) {
  std::cout << "outcome=" << outcome_name(r.outcome)
            << " iterations=" << r.completed_iterations << "/" << r.config.iterations
            << " uaf_hits=" << r.totals.uaf_hits << " stale_hits=" << r.totals.stale_hits
            << " oom_events=" << r.totals.oom_events;
  if (r.first_oom) {
    std::cout << " oom_at_iteration=" << r.first_oom->iteration
              << " oom_order=" << r.first_oom->requested_order
              << " oom_free_pages=" << r.first_oom->report.free_pages
              << " oom_highest_order=" << r.first_oom->report.highest_allocatable_order;
  }
  std::cout << "\n";
}

std::vector<ChartSeries> snapshot_series(const RunReport& r) {
  ChartSeries free_s{"free_pages", {}}, slab_s{"slab", {}}, sun_s{"sunreclaim", {}};
  for (const auto& s : r.snapshots) {
    double t = static_cast<double>(s.timestamp);
    free_s.points.emplace_back(t, static_cast<double>(s.free_pages));
    slab_s.points.emplace_back(t, static_cast<double>(s.slab_analog_pages));
    sun_s.points.emplace_back(t, static_cast<double>(s.sunreclaim_analog_pages));
  }
  return {free_s, slab_s, sun_s};
}

int run_churn_cmd(const ChurnConfig& cfg, bool explore, const std::string& out,
                  const std::string& schedule_out) {
  if (explore) {
    if (cfg.mode != RunMode::Scripted)
      throw Error(Errc::ConfigError, "--explore requires --mode scripted");
    ExploreReport rep = explore_uaf_schedules(cfg);
    if (rep.found) {
      ScheduleArtifact artifact{"explore-uaf", cfg, rep.schedule};
      write_file(schedule_out, artifact_to_json(artifact));
      if (!out.empty()) write_file(out, emit_json(rep.violating_report));
      std::cout << "violation=uaf runs=" << rep.runs
                << " schedule_len=" << rep.schedule.size() << " schedule=" << schedule_out
                << "\n";
      return exit_code_for(Outcome::UafDetected);
    }
    std::cout << (rep.exhausted ? "exhausted" : "bound_reached") << " runs=" << rep.runs
              << " violations=0\n";
    return 0;
  }

  RunReport report = run_churn(cfg);
  if (!out.empty()) write_file(out, emit_json(report));
  print_summary(report);
  return exit_code_for(report.outcome);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rcu-lab: RCU hash-table reclamation laboratory"};
  app.require_subcommand(1);

  // --- churn ---
  ChurnConfig cfg;
  cfg.seed = default_seed();
  std::string policy_name = "immediate", mode_name = "scripted";
  std::string churn_out, schedule_out = "schedule.json";
  bool explore = false;
  std::uint32_t rate = 10, burst = 4;

  auto* churn = app.add_subcommand("churn", "run the create/destroy churn experiment");
  churn->add_option("--policy", policy_name, "immediate|sync|defer|ratelimit");
  churn->add_option("--vfs", cfg.vfs_per_cycle, "VFs per cycle");
  churn->add_option("--iters", cfg.iterations, "cycles to run");
  churn->add_option("--readers", cfg.reader_count, "concurrent reader actors");
  churn->add_option("--pages", cfg.arena_pages, "arena size in pages (power of two)");
  churn->add_option("--seed", cfg.seed, "PRNG seed (default $RCU_LAB_SEED or 1)");
  churn->add_option("--mode", mode_name, "scripted|live");
  churn->add_flag("--panic-on-oom", cfg.panic_on_oom, "stop the run at the first OOM");
  churn->add_option("--grace-period", cfg.grace_driver_period,
                    "grace driver period in ticks (0: no driver)");
  churn->add_option("--backlog", cfg.backlog_hold_ticks,
                    "deferred-backlog injection: reader hold span in ticks");
  churn->add_option("--snapshot-every", cfg.snapshot_every, "cycles between snapshots");
  churn->add_option("--max-vfs", cfg.max_vfs, "device VF capacity");
  churn->add_option("--reserve", cfg.reserved_pages,
                    "pages pinned at the arena base before the run");
  churn->add_option("--rate", rate, "ratelimit: destroys per virtual second");
  churn->add_option("--burst", burst, "ratelimit: bucket burst");
  churn->add_option("--out", churn_out, "write the JSON report here");
  churn->add_option("--schedule-out", schedule_out, "write the violating schedule here");
  churn->add_flag("--explore", explore, "search interleavings for a UAF schedule");

  // --- timing ---
  TimingConfig tcfg;
  std::string timing_policy = "defer", timing_out, timing_svg;
  auto* timing = app.add_subcommand("timing", "three-phase lookup-cost probe");
  timing->add_option("--policy", timing_policy, "must be a deferred policy (defer)");
  timing->add_option("--grace-period", tcfg.grace_driver_period, "grace driver period");
  timing->add_option("--chain", tcfg.chain_position, "target position in its chain (1|2)");
  timing->add_option("--out", timing_out, "write the sample CSV here");
  timing->add_option("--svg", timing_svg, "write an SVG chart here");

  // --- frag ---
  std::string frag_pattern = "alternating", frag_out;
  std::uint32_t frag_pages = 4096;
  std::uint64_t frag_seed = default_seed();
  auto* frag = app.add_subcommand("frag", "fragmentation scenarios");
  frag->add_option("--pattern", frag_pattern, "alternating|churn");
  frag->add_option("--pages", frag_pages, "arena size in pages (power of two)");
  frag->add_option("--seed", frag_seed, "seed for the churn pattern");
  frag->add_option("--out", frag_out, "write the FragReport CSV here");

  // --- replay ---
  std::string replay_in, replay_out;
  auto* replay = app.add_subcommand("replay", "re-execute a schedule artifact or report");
  replay->add_option("--schedule", replay_in, "schedule artifact, report, or config JSON")
      ->required();
  replay->add_option("--out", replay_out, "write the replayed report here");

  // --- report ---
  std::string report_in, report_csv, report_svg;
  auto* report_cmd = app.add_subcommand("report", "render CSV/SVG from a JSON report");
  report_cmd->add_option("--in", report_in, "input report JSON")->required();
  report_cmd->add_option("--csv", report_csv, "write the snapshot CSV here");
  report_cmd->add_option("--svg", report_svg, "write an SVG chart here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (churn->parsed()) {
      cfg.policy = ReclamationPolicy::from_name(policy_name);
      cfg.policy.rate_per_second = rate;
      cfg.policy.burst = burst;
      cfg.mode = run_mode_from_name(mode_name);
      return run_churn_cmd(cfg, explore, churn_out, schedule_out);
    }
    if (timing->parsed()) {
      tcfg.policy = ReclamationPolicy::from_name(timing_policy);
      TimingProbeResult result = run_timing_probe(tcfg);
      if (!timing_out.empty()) write_file(timing_out, timing_csv(result));
      if (!timing_svg.empty()) {
        ChartSeries cost{"traversal_cost", {}};
        for (const auto& s : result.samples)
          cost.points.emplace_back(static_cast<double>(s.tick),
                                   static_cast<double>(s.traversal_cost));
        write_file(timing_svg, render_line_chart("lookup cost across entry lifecycle",
                                                 "virtual tick", "traversal cost", {cost}));
      }
      std::cout << "samples=" << result.samples.size()
                << " unlink_time=" << result.unlink_time
                << " free_time=" << result.free_time
                << " reclaim_latency=" << (result.free_time - result.unlink_time) << "\n";
      return 0;
    }
    if (frag->parsed()) {
      FragSeries series = run_frag_scenario(frag_pattern, frag_pages, frag_seed);
      if (!frag_out.empty()) write_file(frag_out, frag_csv(series));
      const FragReport& last = series.reports.back();
      std::cout << "pattern=" << frag_pattern << " free_pages=" << last.free_pages
                << " highest_allocatable_order=" << last.highest_allocatable_order << "\n";
      return 0;
    }
    if (replay->parsed()) {
      ReplayResult result = replay_from_json(read_file(replay_in));
      if (!replay_out.empty()) write_file(replay_out, emit_json(result.report));
      std::cout << "kind=" << result.kind << " ";
      print_summary(result.report);
      return exit_code_for(result.report.outcome);
    }
    if (report_cmd->parsed()) {
      RunReport report = parse_report(read_file(report_in));
      unsigned max_order = 0;
      if (!report.snapshots.empty() && !report.snapshots.front().per_order_free.empty())
        max_order =
            static_cast<unsigned>(report.snapshots.front().per_order_free.size()) - 1;
      if (!report_csv.empty()) write_file(report_csv, emit_csv(report.snapshots, max_order));
      if (!report_svg.empty())
        write_file(report_svg, render_line_chart("memory series", "virtual tick", "pages",
                                                 snapshot_series(report)));
      std::cout << "snapshots=" << report.snapshots.size() << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::ConfigError ? kExitUsage : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
