#include <doctest.h>

#include <memory>
#include <vector>

#include "rculab/sched.hpp"

using namespace rculab;

namespace {

Actor appender(Scheduler& sched, std::vector<int>& log, int id, int count) {
  for (int i = 0; i < count; ++i) {
    log.push_back(id);
    co_await sched.yield();
  }
}

Actor waiter(Scheduler& sched, const bool& flag, std::vector<int>& log) {
  co_await sched.wait_until([&] { return flag; });
  log.push_back(42);
}

Actor timed(Scheduler& sched, std::vector<Tick>& ticks) {
  co_await sched.wait_time(100);
  ticks.push_back(sched.now());
  co_await sched.wait_time(250);
  ticks.push_back(sched.now());
}

}  // namespace

TEST_CASE("first-runnable policy steps actors in index order") {
  Scheduler sched;
  std::vector<int> log;
  sched.add_actor("a", appender(sched, log, 0, 2));
  sched.add_actor("b", appender(sched, log, 1, 2));
  RunRecord rec = sched.run(SchedulePolicy::first_runnable());
  // Actor 0 runs until done (it is always the lowest runnable index).
  CHECK(log == std::vector<int>{0, 0, 1, 1});
  CHECK_FALSE(rec.stopped);
}

TEST_CASE("explicit trace decides the interleaving") {
  Scheduler sched;
  std::vector<int> log;
  sched.add_actor("a", appender(sched, log, 0, 2));
  sched.add_actor("b", appender(sched, log, 1, 2));
  sched.run(SchedulePolicy::from_trace({1, 0, 1, 0}));
  CHECK(log == std::vector<int>{1, 0, 1, 0});
}

TEST_CASE("trace naming a non-runnable actor is rejected") {
  Scheduler sched;
  std::vector<int> log;
  sched.add_actor("a", appender(sched, log, 0, 1));
  CHECK_THROWS_AS(sched.run(SchedulePolicy::from_trace({5})), Error);
}

TEST_CASE("random policy is deterministic per seed") {
  auto run_once = [](std::uint64_t seed) {
    Scheduler sched;
    std::vector<int> log;
    sched.add_actor("a", appender(sched, log, 0, 4));
    sched.add_actor("b", appender(sched, log, 1, 4));
    sched.add_actor("c", appender(sched, log, 2, 4));
    sched.run(SchedulePolicy::random(seed));
    return log;
  };
  CHECK(run_once(7) == run_once(7));
  CHECK(run_once(7) != run_once(8));  // 12 steps; collision odds are negligible
}

TEST_CASE("wait_until blocks until the predicate holds") {
  Scheduler sched;
  std::vector<int> log;
  bool flag = false;
  sched.add_actor("w", waiter(sched, flag, log));
  sched.add_actor("a", [](Scheduler& s, bool& f, std::vector<int>& l) -> Actor {
    l.push_back(1);
    co_await s.yield();
    l.push_back(2);
    f = true;
    co_await s.yield();
    l.push_back(3);
  }(sched, flag, log));
  sched.run(SchedulePolicy::first_runnable());
  // The waiter (index 0) cannot run until the flag flips at the second step.
  CHECK(log == std::vector<int>{1, 2, 42, 3});
}

TEST_CASE("wait_time jumps the clock when every actor is time-blocked") {
  Scheduler sched;
  std::vector<Tick> ticks;
  sched.add_actor("t", timed(sched, ticks));
  sched.run(SchedulePolicy::first_runnable());
  REQUIRE(ticks.size() == 2);
  CHECK(ticks[0] == 100);
  CHECK(ticks[1] == 250);
}

TEST_CASE("unsatisfiable waits deadlock loudly") {
  Scheduler sched;
  std::vector<int> log;
  bool never = false;
  sched.add_actor("w", waiter(sched, never, log));
  CHECK_THROWS_AS(sched.run(SchedulePolicy::first_runnable()), Error);
}

TEST_CASE("stop predicate halts the run") {
  Scheduler sched;
  std::vector<int> log;
  sched.add_actor("a", appender(sched, log, 0, 100));
  RunRecord rec =
      sched.run(SchedulePolicy::first_runnable(), [&] { return log.size() >= 3; });
  CHECK(rec.stopped);
  CHECK(log.size() == 3);
}

TEST_CASE("exploration enumerates every interleaving of two independent actors") {
  // Two pushes plus the finishing segment: three steps per actor, so the
  // schedule space is C(6,3) = 20.
  long leaves = 0;
  auto run_one = [&](const std::vector<int>& prefix) -> ExploreRun {
    Scheduler sched;
    std::vector<int> log;
    sched.add_actor("a", appender(sched, log, 0, 2));
    sched.add_actor("b", appender(sched, log, 1, 2));
    ExploreRun r;
    r.record = sched.run(SchedulePolicy::from_trace(prefix));
    r.violated = false;
    ++leaves;
    return r;
  };
  ExploreResult res = explore_interleavings(run_one, ExploreBounds{});
  CHECK(res.exhausted);
  CHECK_FALSE(res.found);
  CHECK(res.runs == 20);
  CHECK(leaves == 20);
}

TEST_CASE("exploration reports the first violating schedule") {
  // Violation: actor 1 completes both steps before actor 0 runs at all.
  auto run_one = [&](const std::vector<int>& prefix) -> ExploreRun {
    Scheduler sched;
    auto log = std::make_shared<std::vector<int>>();
    sched.add_actor("a", appender(sched, *log, 0, 2));
    sched.add_actor("b", appender(sched, *log, 1, 2));
    ExploreRun r;
    r.record = sched.run(SchedulePolicy::from_trace(prefix));
    r.violated = log->size() >= 2 && (*log)[0] == 1 && (*log)[1] == 1;
    return r;
  };
  ExploreResult res = explore_interleavings(run_one, ExploreBounds{});
  CHECK(res.found);
  REQUIRE(res.schedule.size() >= 2);
  CHECK(res.schedule[0] == 1);
  CHECK(res.schedule[1] == 1);
}

TEST_CASE("virtual time advances one tick per step") {
  Scheduler sched;
  std::vector<int> log;
  sched.add_actor("a", appender(sched, log, 0, 3));
  sched.run(SchedulePolicy::first_runnable());
  CHECK(sched.now() == 4);  // three pushes plus the finishing segment
}
