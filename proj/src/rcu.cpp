#include "rculab/rcu.hpp"

#include <thread>

#include "rculab/sched.hpp"

namespace rculab {

ReaderHandle& ReaderHandle::operator=(ReaderHandle&& o) noexcept {
  if (this != &o) {
    if (domain_) domain_->release_slot(slot_);
    domain_ = o.domain_;
    slot_ = o.slot_;
    in_section_ = o.in_section_;
    o.domain_ = nullptr;
    o.slot_ = -1;
    o.in_section_ = false;
  }
  return *this;
}

ReaderHandle::~ReaderHandle() {
  if (domain_) domain_->release_slot(slot_);
}

ReadGuard& ReadGuard::operator=(ReadGuard&& o) noexcept {
  if (this != &o) {
    exit();
    domain_ = o.domain_;
    handle_ = o.handle_;
    entered_epoch_ = o.entered_epoch_;
    entered_tick_ = o.entered_tick_;
    o.domain_ = nullptr;
    o.handle_ = nullptr;
  }
  return *this;
}

void ReadGuard::exit() {
  if (!handle_) return;
  auto& slot = *domain_->slots_[static_cast<size_t>(handle_->slot_)];
  slot.active.store(false);
  slot.pinned_epoch.store(RcuDomain::kQuiescent);
  slot.owner_ctx.store(0);
  handle_->in_section_ = false;
  handle_ = nullptr;
  domain_ = nullptr;
}

RcuDomain::RcuDomain(int max_readers, const Clock* clock) : clock_(clock) {
  slots_.reserve(static_cast<size_t>(max_readers));
  for (int i = 0; i < max_readers; ++i) slots_.push_back(std::make_unique<Slot>());
}

ReaderHandle RcuDomain::register_reader() {
  for (size_t i = 0; i < slots_.size(); ++i) {
    bool expected = false;
    if (slots_[i]->registered.compare_exchange_strong(expected, true)) {
      registered_.fetch_add(1);
      return ReaderHandle(this, static_cast<int>(i));
    }
  }
  throw Error(Errc::SlotExhausted, "all reader slots registered");
}

void RcuDomain::release_slot(int slot) {
  auto& s = *slots_[static_cast<size_t>(slot)];
  s.active.store(false);
  s.pinned_epoch.store(kQuiescent);
  s.owner_ctx.store(0);
  s.registered.store(false);
  registered_.fetch_sub(1);
}

ReadGuard RcuDomain::read_enter(ReaderHandle& h) {
  if (h.in_section_)
    throw Error(Errc::NestedReadSection, "handle already has a live guard");
  auto& slot = *slots_[static_cast<size_t>(h.slot_)];
  std::uint64_t e = global_epoch_.load();
  // Pin before raising active: a synchronize scan that sees active=true must
  // also see a valid pinned epoch.
  slot.pinned_epoch.store(e);
  slot.owner_ctx.store(exec_context_id());
  slot.active.store(true);

  ReadGuard g;
  g.domain_ = this;
  g.handle_ = &h;
  g.entered_epoch_ = e;
  g.entered_tick_ = now();
  h.in_section_ = true;
  return g;
}

bool RcuDomain::can_advance() const {
  std::uint64_t g = global_epoch_.load();
  for (const auto& slot : slots_) {
    if (slot->active.load() && slot->pinned_epoch.load() < g) return false;
  }
  return true;
}

bool RcuDomain::try_advance() {
  // A reader whose enter races past this scan pinned the epoch it loaded
  // after the retiring item's unlink, so its traversal can no longer reach
  // that item; missing it here is safe.
  std::uint64_t g = global_epoch_.load();
  for (const auto& slot : slots_) {
    if (slot->active.load() && slot->pinned_epoch.load() < g) return false;
  }
  if (global_epoch_.compare_exchange_strong(g, g + 1)) grace_periods_.fetch_add(1);
  return true;
}

int RcuDomain::drain_due() {
  std::uint64_t g = global_epoch_.load();
  std::vector<DeferredItem> due;
  {
    std::lock_guard<std::mutex> lock(queue_mutex_);
    while (!deferred_.empty() && deferred_.front().enqueue_epoch + 2 <= g) {
      due.push_back(std::move(deferred_.front()));
      deferred_.pop_front();
    }
  }
  for (auto& item : due) {
    if (item.release) item.release();
    callbacks_pending_.fetch_sub(1);
    callbacks_executed_.fetch_add(1);
  }
  return static_cast<int>(due.size());
}

void RcuDomain::defer(DeferredItem item) {
  item.enqueue_epoch = global_epoch_.load();
  item.enqueue_time = now();
  {
    std::lock_guard<std::mutex> lock(queue_mutex_);
    deferred_.push_back(std::move(item));
  }
  callbacks_pending_.fetch_add(1);
}

int RcuDomain::advance_grace_period() {
  std::uint64_t g = global_epoch_.load();
  for (const auto& slot : slots_) {
    if (slot->active.load() && slot->pinned_epoch.load() < g) return 0;
  }
  if (global_epoch_.compare_exchange_strong(g, g + 1)) grace_periods_.fetch_add(1);
  return drain_due();
}

bool RcuDomain::current_context_holds_guard() const {
  std::uint64_t ctx = exec_context_id();
  for (const auto& slot : slots_) {
    if (slot->active.load() && slot->owner_ctx.load() == ctx) return true;
  }
  return false;
}

void RcuDomain::synchronize() {
  if (current_context_holds_guard())
    throw Error(Errc::SelfDeadlock, "synchronize inside a read section");
  std::uint64_t target = global_epoch_.load() + 2;
  while (global_epoch_.load() < target) {
    if (!try_advance()) std::this_thread::yield();
  }
  drain_due();
}

GraceWait::GraceWait(RcuDomain& d) : domain_(d) {
  if (d.current_context_holds_guard())
    throw Error(Errc::SelfDeadlock, "synchronize inside a read section");
  target_ = d.global_epoch() + 2;
}

}  // namespace rculab
