#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

#include "rculab/clock.hpp"
#include "rculab/errors.hpp"

namespace rculab {

// Reclamation work parked until a grace period elapses past its enqueue epoch.
struct DeferredItem {
  std::uint64_t entry_key = 0;     // diagnostic tag for logs
  std::function<void()> release;
  std::uint64_t enqueue_epoch = 0; // filled in by defer()
  Tick enqueue_time = 0;           // filled in by defer()
};

class RcuDomain;

// Owns one reader slot; must outlive any guard opened through it.
class ReaderHandle {
 public:
  ReaderHandle() = default;
  ReaderHandle(ReaderHandle&& o) noexcept { *this = std::move(o); }
  ReaderHandle& operator=(ReaderHandle&& o) noexcept;
  ReaderHandle(const ReaderHandle&) = delete;
  ReaderHandle& operator=(const ReaderHandle&) = delete;
  ~ReaderHandle();

  int slot_index() const { return slot_; }
  bool valid() const { return domain_ != nullptr; }

 private:
  friend class RcuDomain;
  friend class ReadGuard;
  ReaderHandle(RcuDomain* d, int slot) : domain_(d), slot_(slot) {}
  RcuDomain* domain_ = nullptr;
  int slot_ = -1;
  bool in_section_ = false;  // no nested read sections in v1
};

// RAII read-side critical section. Entry references obtained under a guard
// are invalid once the guard exits.
class ReadGuard {
 public:
  ReadGuard() = default;
  ReadGuard(ReadGuard&& o) noexcept { *this = std::move(o); }
  ReadGuard& operator=(ReadGuard&& o) noexcept;
  ReadGuard(const ReadGuard&) = delete;
  ReadGuard& operator=(const ReadGuard&) = delete;
  ~ReadGuard() { exit(); }

  void exit();  // idempotent
  bool live() const { return handle_ != nullptr; }
  std::uint64_t entered_epoch() const { return entered_epoch_; }
  Tick entered_tick() const { return entered_tick_; }

 private:
  friend class RcuDomain;
  RcuDomain* domain_ = nullptr;
  ReaderHandle* handle_ = nullptr;
  std::uint64_t entered_epoch_ = 0;
  Tick entered_tick_ = 0;
};

// Epoch-based grace-period domain. Readers pin the epoch observed at entry;
// an item deferred at epoch e retires once the global epoch reaches e + 2.
class RcuDomain {
 public:
  static constexpr std::uint64_t kQuiescent = ~std::uint64_t{0};
  static constexpr int kDefaultMaxReaders = 64;

  explicit RcuDomain(int max_readers = kDefaultMaxReaders, const Clock* clock = nullptr);

  ReaderHandle register_reader();           // Errc::SlotExhausted
  ReadGuard read_enter(ReaderHandle& h);    // Errc::NestedReadSection
  void read_exit(ReadGuard& g) { g.exit(); }

  // Blocking wait for a full grace period (two epoch advances); executes all
  // due deferred items before returning. Errc::SelfDeadlock when the calling
  // context holds a live guard on this domain.
  void synchronize();

  void defer(DeferredItem item);

  // Non-blocking grace-period driver: one epoch advance when every slot is
  // quiescent or pinned at the current epoch. Returns callbacks executed.
  int advance_grace_period();

  // Pure check: would advance_grace_period make progress right now?
  bool can_advance() const;

  std::uint64_t global_epoch() const { return global_epoch_.load(); }
  std::uint64_t grace_periods_completed() const { return grace_periods_.load(); }
  std::uint64_t callbacks_pending() const { return callbacks_pending_.load(); }
  std::uint64_t callbacks_executed() const { return callbacks_executed_.load(); }
  int max_readers() const { return static_cast<int>(slots_.size()); }
  int registered_readers() const { return registered_.load(); }

  // True if the current execution context holds a live guard here.
  bool current_context_holds_guard() const;

  Tick now() const { return clock_ ? clock_->now() : 0; }

 private:
  friend class ReaderHandle;
  friend class ReadGuard;
  friend class GraceWait;

  struct Slot {
    std::atomic<std::uint64_t> pinned_epoch{kQuiescent};
    std::atomic<bool> active{false};
    std::atomic<std::uint64_t> owner_ctx{0};
    std::atomic<bool> registered{false};
  };

  void release_slot(int slot);
  bool try_advance();
  int drain_due();

  std::vector<std::unique_ptr<Slot>> slots_;
  std::atomic<std::uint64_t> global_epoch_{0};
  std::atomic<int> registered_{0};
  std::atomic<std::uint64_t> grace_periods_{0};
  std::atomic<std::uint64_t> callbacks_pending_{0};
  std::atomic<std::uint64_t> callbacks_executed_{0};

  std::mutex queue_mutex_;
  std::deque<DeferredItem> deferred_;  // FIFO; enqueue epochs are non-decreasing

  const Clock* clock_;
};

// Incremental form of synchronize for scripted actors: construct (runs the
// self-deadlock check, fixes the target epoch), then step advance_grace_period
// whenever can_advance() until done().
class GraceWait {
 public:
  explicit GraceWait(RcuDomain& d);
  bool done() const { return domain_.global_epoch() >= target_; }
  std::uint64_t target_epoch() const { return target_; }

 private:
  RcuDomain& domain_;
  std::uint64_t target_;
};

}  // namespace rculab
