#pragma once

#include <coroutine>
#include <cstdint>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "rculab/clock.hpp"
#include "rculab/errors.hpp"

namespace rculab {

// Identifier of the running execution context: a scripted actor when the
// scheduler is stepping one, otherwise the OS thread. Used for self-deadlock
// detection in RcuDomain::synchronize.
std::uint64_t exec_context_id();

class Scheduler;

// Coroutine task owned and stepped by the Scheduler. Actor bodies mark their
// interleaving points with `co_await sched.yield()` and friends.
class Actor {
 public:
  struct promise_type {
    Scheduler* sched = nullptr;
    int index = -1;
    std::exception_ptr error;

    Actor get_return_object() {
      return Actor{std::coroutine_handle<promise_type>::from_promise(*this)};
    }
    std::suspend_always initial_suspend() noexcept { return {}; }
    std::suspend_always final_suspend() noexcept { return {}; }
    void return_void() {}
    void unhandled_exception() { error = std::current_exception(); }
  };

  Actor() = default;
  explicit Actor(std::coroutine_handle<promise_type> h) : handle_(h) {}
  Actor(Actor&& o) noexcept : handle_(o.handle_) { o.handle_ = {}; }
  Actor& operator=(Actor&& o) noexcept {
    if (this != &o) {
      destroy();
      handle_ = o.handle_;
      o.handle_ = {};
    }
    return *this;
  }
  Actor(const Actor&) = delete;
  Actor& operator=(const Actor&) = delete;
  ~Actor() { destroy(); }

  std::coroutine_handle<promise_type> handle() const { return handle_; }
  bool valid() const { return static_cast<bool>(handle_); }

 private:
  void destroy() {
    if (handle_) {
      handle_.destroy();
      handle_ = {};
    }
  }
  std::coroutine_handle<promise_type> handle_;
};

struct SchedulePolicy {
  enum class Kind { FirstRunnable, Trace, Random };
  Kind kind = Kind::FirstRunnable;
  std::vector<int> trace;       // Kind::Trace: explicit choices, then first-runnable
  std::uint64_t seed = 0;       // Kind::Random

  static SchedulePolicy first_runnable() { return {}; }
  static SchedulePolicy from_trace(std::vector<int> t) {
    return {Kind::Trace, std::move(t), 0};
  }
  static SchedulePolicy random(std::uint64_t seed) { return {Kind::Random, {}, seed}; }
};

// One scripted execution: the chosen actor per step plus, for exploration,
// the full runnable set observed before each choice.
struct RunRecord {
  std::vector<int> chosen;
  std::vector<std::vector<int>> runnable_sets;
  bool stopped = false;
  Tick end_tick = 0;
};

// Single-threaded deterministic stepper. Exactly one actor runs between two
// yield points; shared state is only ever touched by the running actor, so an
// execution is a pure function of the schedule.
class Scheduler {
 public:
  Scheduler() = default;
  ~Scheduler() { shutdown(); }
  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  int add_actor(std::string name, Actor actor);

  StepClock& clock() { return clock_; }
  Tick now() const { return clock_.now(); }
  int current_actor() const { return current_; }
  int actor_count() const { return static_cast<int>(actors_.size()); }
  const std::string& actor_name(int i) const { return actors_[static_cast<size_t>(i)].name; }

  // --- awaitables, used inside actor coroutines ---

  struct YieldAwaiter {
    Scheduler* s;
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<>) const noexcept {}
    void await_resume() const noexcept {}
  };
  // Unconditional interleaving point.
  YieldAwaiter yield() { return {this}; }

  struct WaitAwaiter {
    Scheduler* s;
    std::function<bool()> pred;
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) const;
    void await_resume() const noexcept {}
  };
  // Suspend until pred() holds. Evaluated by the scheduler when picking the
  // next actor; always counts as a yield point even if pred is already true.
  WaitAwaiter wait_until(std::function<bool()> pred) { return {this, std::move(pred)}; }

  struct TimeAwaiter {
    Scheduler* s;
    Tick wake;
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) const;
    void await_resume() const noexcept {}
  };
  // Suspend until virtual time reaches `abs_tick`. If every live actor is
  // time-blocked the clock jumps forward to the earliest wake tick.
  TimeAwaiter wait_time(Tick abs_tick) { return {this, abs_tick}; }
  TimeAwaiter wait_for(Tick delta) { return {this, clock_.now() + delta}; }

  // --- driving ---

  std::vector<int> runnable();
  bool all_done() const;
  // Resume one runnable actor for one step. Throws if the actor cannot run.
  void step(int actor);

  // Run until all actors finish, `stop` fires, or `max_steps` is hit.
  // Throws Errc::Deadlock if live actors remain but none can ever run.
  RunRecord run(const SchedulePolicy& policy, std::function<bool()> stop = {},
                long max_steps = -1);

  // Destroy all actor coroutines (suspended frames unwind their locals).
  void shutdown();

 private:
  enum class WaitKind { None, Pred, Time };
  struct ActorState {
    std::string name;
    Actor actor;
    WaitKind wait = WaitKind::None;
    std::function<bool()> pred;
    Tick wake = 0;
    bool done = false;
  };

  bool actor_runnable(const ActorState& st) const;

  std::vector<ActorState> actors_;
  StepClock clock_;
  int current_ = -1;
};

// Bounded deterministic interleaving search (stateless DFS over schedules).
// `run_one` executes a fresh world following `prefix` (then lowest runnable),
// returning the realized RunRecord and whether the violation predicate fired.
struct ExploreBounds {
  long max_steps_per_run = 256;
  long max_runs = 4000000;
};

struct ExploreResult {
  bool found = false;           // a violating schedule exists within bounds
  bool exhausted = false;       // the whole bounded space was enumerated
  std::vector<int> schedule;    // first violating schedule when found
  long runs = 0;
};

struct ExploreRun {
  RunRecord record;
  bool violated = false;
};

ExploreResult explore_interleavings(
    const std::function<ExploreRun(const std::vector<int>& prefix)>& run_one,
    const ExploreBounds& bounds);

}  // namespace rculab
