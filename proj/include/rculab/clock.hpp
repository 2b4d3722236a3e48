#pragma once

#include <chrono>
#include <cstdint>

namespace rculab {

// Virtual time. In scripted mode one tick is one scheduler step; in live mode
// a tick is a microsecond of wall clock since run start.
using Tick = std::uint64_t;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Tick now() const = 0;
  virtual Tick ticks_per_second() const = 0;
};

// Scripted-mode clock; the scheduler advances it.
class StepClock final : public Clock {
 public:
  Tick now() const override { return now_; }
  Tick ticks_per_second() const override { return 1000; }
  void advance(Tick n = 1) { now_ += n; }
  void jump_to(Tick t) {
    if (t > now_) now_ = t;
  }

 private:
  Tick now_ = 0;
};

// Live-mode clock: microseconds since construction.
class SteadyClock final : public Clock {
 public:
  SteadyClock() : start_(std::chrono::steady_clock::now()) {}
  Tick now() const override {
    auto d = std::chrono::steady_clock::now() - start_;
    return static_cast<Tick>(
        std::chrono::duration_cast<std::chrono::microseconds>(d).count());
  }
  Tick ticks_per_second() const override { return 1000000; }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace rculab
