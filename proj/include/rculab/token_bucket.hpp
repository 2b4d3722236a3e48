#pragma once

#include <algorithm>
#include <cstdint>

#include "rculab/clock.hpp"

namespace rculab {

// Token bucket over virtual time, integer arithmetic only so refill is exact
// and replayable. Internally one token = ticks_per_second units.
class TokenBucket {
 public:
  TokenBucket(std::uint32_t rate_per_second, std::uint32_t burst,
              Tick ticks_per_second, Tick start_tick)
      : rate_(rate_per_second),
        scale_(ticks_per_second),
        capacity_units_(static_cast<std::uint64_t>(burst) * ticks_per_second),
        units_(static_cast<std::uint64_t>(burst) * ticks_per_second),
        last_(start_tick) {}

  bool try_take(Tick now) {
    refill(now);
    if (units_ < scale_) return false;
    units_ -= scale_;
    return true;
  }

  // Earliest tick at which try_take can succeed.
  Tick next_ready(Tick now) {
    refill(now);
    if (units_ >= scale_) return now;
    std::uint64_t deficit = scale_ - units_;
    return now + (deficit + rate_ - 1) / rate_;
  }

 private:
  void refill(Tick now) {
    if (now <= last_) return;
    units_ = std::min(capacity_units_, units_ + (now - last_) * rate_);
    last_ = now;
  }

  std::uint64_t rate_;
  std::uint64_t scale_;
  std::uint64_t capacity_units_;
  std::uint64_t units_;
  Tick last_;
};

}  // namespace rculab
