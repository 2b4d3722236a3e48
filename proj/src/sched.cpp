#include "rculab/sched.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <random>

namespace rculab {

namespace {
thread_local std::uint64_t t_scripted_ctx = 0;
thread_local std::uint64_t t_thread_ctx = 0;
std::atomic<std::uint64_t> g_thread_ctx_counter{1};
}  // namespace

std::uint64_t exec_context_id() {
  if (t_scripted_ctx != 0) return t_scripted_ctx;
  if (t_thread_ctx == 0) t_thread_ctx = g_thread_ctx_counter.fetch_add(1);
  return t_thread_ctx;
}

int Scheduler::add_actor(std::string name, Actor actor) {
  int index = static_cast<int>(actors_.size());
  auto& promise = actor.handle().promise();
  promise.sched = this;
  promise.index = index;
  ActorState st;
  st.name = std::move(name);
  st.actor = std::move(actor);
  actors_.push_back(std::move(st));
  return index;
}

void Scheduler::WaitAwaiter::await_suspend(std::coroutine_handle<>) const {
  auto& st = s->actors_[static_cast<size_t>(s->current_)];
  st.wait = WaitKind::Pred;
  st.pred = pred;
}

void Scheduler::TimeAwaiter::await_suspend(std::coroutine_handle<>) const {
  auto& st = s->actors_[static_cast<size_t>(s->current_)];
  st.wait = WaitKind::Time;
  st.wake = wake;
}

bool Scheduler::actor_runnable(const ActorState& st) const {
  if (st.done) return false;
  switch (st.wait) {
    case WaitKind::None:
      return true;
    case WaitKind::Pred:
      return st.pred();
    case WaitKind::Time:
      return clock_.now() >= st.wake;
  }
  return false;
}

std::vector<int> Scheduler::runnable() {
  std::vector<int> out;
  for (size_t i = 0; i < actors_.size(); ++i) {
    if (actor_runnable(actors_[i])) out.push_back(static_cast<int>(i));
  }
  return out;
}

bool Scheduler::all_done() const {
  return std::all_of(actors_.begin(), actors_.end(),
                     [](const ActorState& st) { return st.done || !st.actor.valid(); });
}

void Scheduler::step(int actor) {
  auto& st = actors_.at(static_cast<size_t>(actor));
  if (!actor_runnable(st)) throw Error(Errc::ConfigError, "stepping a non-runnable actor");
  st.wait = WaitKind::None;
  st.pred = nullptr;

  current_ = actor;
  t_scripted_ctx = reinterpret_cast<std::uintptr_t>(this) + 2 * static_cast<std::uint64_t>(actor) + 1;
  auto handle = st.actor.handle();
  handle.resume();
  t_scripted_ctx = 0;
  current_ = -1;

  if (handle.done()) st.done = true;
  if (handle.promise().error) {
    auto err = handle.promise().error;
    handle.promise().error = nullptr;
    st.done = true;
    std::rethrow_exception(err);
  }
  clock_.advance(1);
}

RunRecord Scheduler::run(const SchedulePolicy& policy, std::function<bool()> stop,
                         long max_steps) {
  RunRecord rec;
  std::mt19937_64 rng(policy.seed);
  size_t trace_pos = 0;

  while (!all_done()) {
    if (stop && stop()) {
      rec.stopped = true;
      break;
    }
    if (max_steps >= 0 && static_cast<long>(rec.chosen.size()) >= max_steps) {
      rec.stopped = true;
      break;
    }

    std::vector<int> ready = runnable();
    if (ready.empty()) {
      // If everyone is waiting on virtual time, jump the clock forward.
      Tick wake = std::numeric_limits<Tick>::max();
      for (const auto& st : actors_) {
        if (!st.done && st.wait == WaitKind::Time) wake = std::min(wake, st.wake);
      }
      if (wake == std::numeric_limits<Tick>::max())
        throw Error(Errc::Deadlock, "no actor can make progress");
      clock_.jump_to(wake);
      continue;
    }

    int choice;
    if (policy.kind == SchedulePolicy::Kind::Trace && trace_pos < policy.trace.size()) {
      choice = policy.trace[trace_pos++];
      if (std::find(ready.begin(), ready.end(), choice) == ready.end())
        throw Error(Errc::ConfigError, "schedule step names a non-runnable actor");
    } else if (policy.kind == SchedulePolicy::Kind::Random) {
      choice = ready[std::uniform_int_distribution<size_t>(0, ready.size() - 1)(rng)];
    } else {
      choice = ready.front();
    }

    rec.runnable_sets.push_back(ready);
    rec.chosen.push_back(choice);
    step(choice);
  }
  rec.end_tick = clock_.now();
  return rec;
}

void Scheduler::shutdown() {
  // Destroy in reverse registration order; suspended frames unwind locals.
  for (auto it = actors_.rbegin(); it != actors_.rend(); ++it) {
    it->actor = Actor{};
    it->done = true;
  }
  actors_.clear();
}

ExploreResult explore_interleavings(
    const std::function<ExploreRun(const std::vector<int>& prefix)>& run_one,
    const ExploreBounds& bounds) {
  ExploreResult result;
  std::vector<std::vector<int>> pending;
  pending.push_back({});

  while (!pending.empty()) {
    if (result.runs >= bounds.max_runs) return result;  // bound hit, not exhausted
    std::vector<int> prefix = std::move(pending.back());
    pending.pop_back();

    ExploreRun r = run_one(prefix);
    ++result.runs;
    if (r.violated) {
      result.found = true;
      result.schedule = r.record.chosen;
      return result;
    }
    for (size_t i = prefix.size(); i < r.record.chosen.size(); ++i) {
      for (int alt : r.record.runnable_sets[i]) {
        if (alt == r.record.chosen[i]) continue;
        std::vector<int> next(r.record.chosen.begin(),
                              r.record.chosen.begin() + static_cast<long>(i));
        next.push_back(alt);
        pending.push_back(std::move(next));
      }
    }
  }
  result.exhausted = true;
  return result;
}

}  // namespace rculab
