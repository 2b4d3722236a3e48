#include <doctest.h>

#include <string>

#include "rculab/harness.hpp"
#include "rculab/svg.hpp"
#include "rculab/telemetry.hpp"
#include "rculab/vf_manager.hpp"

using namespace rculab;

namespace {

struct SnapshotFixture {
  StepClock clock;
  RcuDomain domain{8, &clock};
  BuddyAllocator allocator{4096};
  RcuHashTable table{64, HashConfig{}, &clock};
  EventLog log;
  VfManager manager{table,
                    allocator,
                    domain,
                    ReclamationPolicy::call_rcu(),
                    VfFootprintSpec::standard(),
                    64,
                    log,
                    &clock};
};

}  // namespace

TEST_CASE("fresh world snapshot") {
  SnapshotFixture f;
  MemSnapshot s = take_snapshot(f.manager, f.domain, f.clock);
  CHECK(s.free_pages == 4096);
  CHECK(s.slab_analog_pages == 0);
  CHECK(s.sunreclaim_analog_pages == 0);
  CHECK(s.num_vfs == 0);
  CHECK(s.other_allocated_pages == 0);
  CHECK(s.accounting_identity_holds());
}

TEST_CASE("64 live VFs account for 1024 slab-analog pages") {
  SnapshotFixture f;
  f.manager.set_num_vfs(64);
  MemSnapshot s = take_snapshot(f.manager, f.domain, f.clock);
  CHECK(s.slab_analog_pages == 1024);
  CHECK(s.free_pages == 3072);
  CHECK(s.num_vfs == 64);
  CHECK(s.accounting_identity_holds());
}

TEST_CASE("snapshot splits live, unreclaimed, and foreign pages") {
  SnapshotFixture f;
  f.manager.set_num_vfs(8);
  f.manager.destroy_vf(7);  // call_rcu: parked as unreclaimed
  f.manager.destroy_vf(6);
  BlockRef foreign = std::get<BlockRef>(f.allocator.alloc(4, false));
  MemSnapshot s = take_snapshot(f.manager, f.domain, f.clock);
  CHECK(s.slab_analog_pages == 6 * 16);
  CHECK(s.sunreclaim_analog_pages == 2 * 16);
  CHECK(s.other_allocated_pages == 16);
  CHECK(s.accounting_identity_holds());
  CHECK(s.callbacks_pending == 2);
  // Counters agree with brute-force audits of the entry set.
  CHECK(s.slab_analog_pages == 16 * f.manager.count_published());
  CHECK(s.sunreclaim_analog_pages == f.manager.audit_unreclaimed_pages());
  f.allocator.free(foreign);
}

TEST_CASE("csv emission: header plus one row per snapshot") {
  SnapshotFixture f;
  std::vector<MemSnapshot> snaps;
  for (int i = 0; i < 3; ++i) {
    snaps.push_back(take_snapshot(f.manager, f.domain, f.clock));
    f.clock.advance(10);
  }
  std::string csv = emit_csv(snaps, 3);
  CHECK(csv.rfind("timestamp,free_pages,slab,sunreclaim,num_vfs,order_0,order_1,order_2,order_3\n",
                  0) == 0);
  size_t lines = 0;
  for (char c : csv)
    if (c == '\n') ++lines;
  CHECK(lines == 4);
}

TEST_CASE("csv quoting follows RFC 4180") {
  CHECK(csv_quote("plain") == "plain");
  CHECK(csv_quote("with,comma") == "\"with,comma\"");
  CHECK(csv_quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("empty run report round-trips byte-identically") {
  RunReport r;
  r.config = ChurnConfig{};
  std::string first = emit_json(r);
  RunReport parsed = parse_report(first);
  std::string second = emit_json(parsed);
  CHECK(first == second);
  CHECK(first.find("\"schema\":\"rcu-lab/1\"") != std::string::npos);
  CHECK(first.find("\"snapshots\":[]") != std::string::npos);
}

TEST_CASE("a real churn report round-trips byte-identically") {
  ChurnConfig cfg;
  cfg.policy = ReclamationPolicy::call_rcu();
  cfg.iterations = 8;
  cfg.vfs_per_cycle = 4;
  cfg.reader_count = 2;
  cfg.arena_pages = 512;
  cfg.grace_driver_period = 40;
  cfg.seed = 17;
  RunReport r = run_churn(cfg);
  std::string first = emit_json(r);
  std::string second = emit_json(parse_report(first));
  CHECK(first == second);
}

TEST_CASE("every snapshot of a churn run satisfies the accounting identity") {
  for (const char* policy : {"immediate", "sync", "defer"}) {
    ChurnConfig cfg;
    cfg.policy = ReclamationPolicy::from_name(policy);
    cfg.iterations = 10;
    cfg.vfs_per_cycle = 6;
    cfg.reader_count = 2;
    cfg.arena_pages = 1024;
    cfg.grace_driver_period = cfg.policy.kind == PolicyKind::CallRcu ? 50 : 0;
    cfg.seed = 23;
    RunReport r = run_churn(cfg);
    REQUIRE(!r.snapshots.empty());
    for (const auto& s : r.snapshots) {
      CHECK(s.accounting_identity_holds());
      CHECK(s.other_allocated_pages == 0);  // churn worlds have no foreign users
    }
  }
}

TEST_CASE("the SVG chart is self-contained and draws one polyline per series") {
  std::vector<ChartSeries> series{
      {"free", {{0, 100}, {1, 90}, {2, 95}}},
      {"used & pinned", {{0, 0}, {1, 10}, {2, 5}}},
  };
  std::string svg = render_line_chart("memory", "tick", "pages", series);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("href") == std::string::npos);  // no external assets
  CHECK(svg.find("used &amp; pinned") != std::string::npos);
  size_t polylines = 0;
  for (size_t pos = 0; (pos = svg.find("<polyline", pos)) != std::string::npos; ++pos)
    ++polylines;
  CHECK(polylines == 2);
}

TEST_CASE("config JSON round-trips") {
  ChurnConfig cfg;
  cfg.policy = ReclamationPolicy::rate_limited(PolicyKind::ImmediateFree, 25, 7);
  cfg.iterations = 42;
  cfg.backlog_hold_ticks = 99;
  cfg.panic_on_oom = true;
  ChurnConfig back = config_from_json_string(config_to_json_string(cfg));
  CHECK(back.iterations == 42);
  CHECK(back.policy.kind == PolicyKind::RateLimited);
  CHECK(back.policy.rate_per_second == 25);
  CHECK(back.policy.burst == 7);
  CHECK(back.backlog_hold_ticks == 99);
  CHECK(back.panic_on_oom);
  CHECK(config_to_json_string(back) == config_to_json_string(cfg));
}
