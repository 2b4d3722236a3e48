#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "rculab/rcu.hpp"
#include "rculab/sched.hpp"

using namespace rculab;

TEST_CASE("reader registration assigns sequential slots and caps out") {
  RcuDomain d(2);
  ReaderHandle a = d.register_reader();
  ReaderHandle b = d.register_reader();
  CHECK(a.slot_index() == 0);
  CHECK(b.slot_index() == 1);
  CHECK_THROWS_AS(d.register_reader(), Error);
}

TEST_CASE("releasing a handle frees its slot") {
  RcuDomain d(1);
  { ReaderHandle a = d.register_reader(); }
  ReaderHandle b = d.register_reader();
  CHECK(b.slot_index() == 0);
}

TEST_CASE("read_enter pins the observed epoch") {
  RcuDomain d(4);
  ReaderHandle h = d.register_reader();
  ReadGuard g = d.read_enter(h);
  CHECK(g.entered_epoch() == 0);
  g.exit();

  d.synchronize();  // advances the epoch by 2
  ReadGuard g2 = d.read_enter(h);
  CHECK(g2.entered_epoch() == 2);
}

TEST_CASE("nested read sections are rejected") {
  RcuDomain d(4);
  ReaderHandle h = d.register_reader();
  ReadGuard g = d.read_enter(h);
  CHECK_THROWS_AS(d.read_enter(h), Error);
  g.exit();
  ReadGuard g2 = d.read_enter(h);  // fine after exit
  CHECK(g2.live());
}

TEST_CASE("synchronize with no readers advances the epoch by two") {
  RcuDomain d(4);
  d.synchronize();
  CHECK(d.global_epoch() == 2);
  CHECK(d.grace_periods_completed() == 2);
}

TEST_CASE("synchronize inside a read section is a self-deadlock error") {
  RcuDomain d(4);
  ReaderHandle h = d.register_reader();
  ReadGuard g = d.read_enter(h);
  CHECK_THROWS_AS(d.synchronize(), Error);
  g.exit();
  d.synchronize();  // ok once the guard is gone
}

TEST_CASE("deferred items run in FIFO order after a grace period") {
  RcuDomain d(4);
  std::vector<int> order;
  for (int i = 0; i < 3; ++i)
    d.defer(DeferredItem{static_cast<std::uint64_t>(i), [&order, i] { order.push_back(i); }});
  CHECK(d.callbacks_pending() == 3);
  d.synchronize();
  CHECK(order == std::vector<int>{0, 1, 2});
  CHECK(d.callbacks_pending() == 0);
  CHECK(d.callbacks_executed() == 3);
}

TEST_CASE("two-epoch retirement: two advances execute items deferred now") {
  RcuDomain d(4);
  int executed = 0;
  d.defer(DeferredItem{0, [&] { ++executed; }});
  d.defer(DeferredItem{1, [&] { ++executed; }});
  CHECK(d.advance_grace_period() == 0);  // epoch e+1: items not yet due
  CHECK(executed == 0);
  CHECK(d.advance_grace_period() == 2);  // epoch e+2: both retire
  CHECK(executed == 2);
}

TEST_CASE("a reader pinned at an old epoch blocks the advance") {
  RcuDomain d(4);
  ReaderHandle h = d.register_reader();
  d.advance_grace_period();  // epoch 1
  ReadGuard g = d.read_enter(h);
  CHECK(d.advance_grace_period() >= 0);  // epoch 2: reader pinned at current is fine
  CHECK(d.global_epoch() == 2);
  std::uint64_t before = d.global_epoch();
  CHECK(d.advance_grace_period() == 0);  // reader now pinned below current
  CHECK(d.global_epoch() == before);
  g.exit();
  d.advance_grace_period();
  CHECK(d.global_epoch() == 3);
}

TEST_CASE("advance on an empty domain is a no-op that still advances the epoch") {
  RcuDomain d(4);
  CHECK(d.advance_grace_period() == 0);
  CHECK(d.global_epoch() == 1);
}

TEST_CASE("items deferred while a reader is in-section wait for its exit") {
  RcuDomain d(4);
  ReaderHandle h = d.register_reader();
  ReadGuard g = d.read_enter(h);  // pinned at epoch 0
  int executed = 0;
  d.defer(DeferredItem{7, [&] { ++executed; }});
  d.advance_grace_period();  // 0 -> 1 (reader pinned at current 0 does not block)
  CHECK(d.advance_grace_period() == 0);  // blocked: reader pinned below 1
  CHECK(executed == 0);
  g.exit();
  d.advance_grace_period();  // 1 -> 2, item due
  CHECK(executed == 1);
}

TEST_CASE("pending counter models an unbounded deferred-free backlog") {
  RcuDomain d(4);
  for (int i = 0; i < 40; ++i) d.defer(DeferredItem{0, [] {}});
  CHECK(d.callbacks_pending() == 40);
  CHECK(d.callbacks_executed() == 0);
}

TEST_CASE("counter conservation holds across random op sequences") {
  std::mt19937_64 rng(123);
  RcuDomain d(8);
  ReaderHandle h = d.register_reader();
  ReadGuard guard;
  std::uint64_t defers = 0;
  for (int i = 0; i < 2000; ++i) {
    switch (rng() % 4) {
      case 0:
        d.defer(DeferredItem{0, [] {}});
        ++defers;
        break;
      case 1:
        d.advance_grace_period();
        break;
      case 2:
        if (!guard.live()) guard = d.read_enter(h);
        break;
      default:
        guard.exit();
        break;
    }
    CHECK(d.callbacks_pending() + d.callbacks_executed() == defers);
  }
  guard.exit();
  while (d.callbacks_pending() > 0) d.advance_grace_period();
  CHECK(d.callbacks_executed() == defers);
}

namespace {

struct OrderingProbe {
  Tick reader_exit_tick = 0;
  Tick sync_return_tick = 0;
};

Actor ordering_reader(Scheduler& sched, RcuDomain& d, OrderingProbe& p) {
  ReaderHandle h = d.register_reader();
  ReadGuard g = d.read_enter(h);  // enters at tick 0
  co_await sched.wait_time(5);
  p.reader_exit_tick = sched.now();
  g.exit();
}

Actor ordering_syncer(Scheduler& sched, RcuDomain& d, OrderingProbe& p) {
  co_await sched.yield();  // called at tick >= 1, after the reader entered
  GraceWait gw(d);
  while (!gw.done()) {
    co_await sched.wait_until([&] { return gw.done() || d.can_advance(); });
    if (!gw.done()) d.advance_grace_period();
  }
  p.sync_return_tick = sched.now();
}

}  // namespace

TEST_CASE("scripted synchronize returns only after the straddling reader exits") {
  Scheduler sched;
  RcuDomain d(4, &sched.clock());
  OrderingProbe p;
  sched.add_actor("reader", ordering_reader(sched, d, p));
  sched.add_actor("syncer", ordering_syncer(sched, d, p));
  sched.run(SchedulePolicy::first_runnable());
  CHECK(p.reader_exit_tick >= 5);
  CHECK(p.sync_return_tick >= p.reader_exit_tick);
}
