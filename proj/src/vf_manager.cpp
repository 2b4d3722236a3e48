#include "rculab/vf_manager.hpp"

#include <cassert>
#include <chrono>
#include <thread>

namespace rculab {

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::Create: return "create";
    case EventKind::Unlink: return "unlink";
    case EventKind::Free: return "free";
    case EventKind::Oom: return "oom";
    case EventKind::Uaf: return "uaf";
    case EventKind::Stale: return "stale";
  }
  return "?";
}

ReclamationPolicy ReclamationPolicy::from_name(const std::string& name) {
  if (name == "immediate") return immediate();
  if (name == "sync") return synchronize_rcu();
  if (name == "defer") return call_rcu();
  if (name == "ratelimit") return rate_limited(PolicyKind::ImmediateFree, 10, 4);
  throw Error(Errc::ConfigError, "unknown policy '" + name + "'");
}

std::string ReclamationPolicy::name() const {
  switch (kind) {
    case PolicyKind::ImmediateFree: return "immediate";
    case PolicyKind::SynchronizeRcu: return "sync";
    case PolicyKind::CallRcu: return "defer";
    case PolicyKind::RateLimited: return "ratelimit";
  }
  return "?";
}

VfManager::VfManager(RcuHashTable& table, BuddyAllocator& allocator, RcuDomain& domain,
                     ReclamationPolicy policy, VfFootprintSpec footprint,
                     std::uint32_t max_vfs, EventLog& log, const Clock* clock)
    : table_(table),
      allocator_(allocator),
      domain_(domain),
      policy_(policy),
      footprint_(std::move(footprint)),
      max_vfs_(max_vfs),
      log_(log),
      clock_(clock),
      bucket_(policy.rate_per_second, policy.burst,
              clock ? clock->ticks_per_second() : 1000, clock ? clock->now() : 0) {}

std::optional<OomEvent> VfManager::create_vf(std::uint64_t key) {
  std::lock_guard<std::mutex> lock(state_mutex_);
  if (live_keys_.count(key))
    throw Error(Errc::DuplicateKey, "vf key " + std::to_string(key));

  std::vector<BlockRef> blocks;
  for (const auto& spec : footprint_.blocks) {
    for (unsigned i = 0; i < spec.count; ++i) {
      AllocResult r = allocator_.alloc(spec.order, /*movable=*/false);
      if (auto* fail = std::get_if<AllocFailure>(&r)) {
        for (const auto& b : blocks) allocator_.free(b);
        OomEvent oom{now(), fail->order, 0, std::move(fail->report)};
        log_.record_oom(oom);
        return oom;
      }
      blocks.push_back(std::get<BlockRef>(r));
    }
  }

  arena_.push_back(std::make_unique<EntryRecord>(key));
  EntryRecord* entry = arena_.back().get();
  all_entries_.push_back(entry);
  entry->footprint = std::move(blocks);
  entry->refcount.store(1);  // the table's reference
  table_.publish(entry);
  live_keys_.insert(key);
  live_pages_ += entry->footprint_pages();
  log_.record(Event{now(), EventKind::Create, key, entry->footprint_pages()});
  return std::nullopt;
}

EntryRecord* VfManager::unlink_vf(std::uint64_t key) {
  std::lock_guard<std::mutex> lock(state_mutex_);
  EntryRecord* entry = table_.unlink(key);
  live_keys_.erase(key);
  int before = entry->refcount.fetch_sub(1);
  assert(before == 1);
  (void)before;
  std::uint64_t pages = entry->footprint_pages();
  live_pages_ -= pages;
  unreclaimed_pages_ += pages;
  log_.record(Event{now(), EventKind::Unlink, key, pages});
  return entry;
}

void VfManager::release_footprint(EntryRecord* entry) {
  std::lock_guard<std::mutex> lock(state_mutex_);
  assert(entry->state.load() == Lifecycle::Unlinked);
  for (const auto& b : entry->footprint) allocator_.free(b);
  std::uint64_t pages = entry->footprint_pages();
  entry->footprint.clear();
  unreclaimed_pages_ -= pages;
  entry->state.store(Lifecycle::Freed);
  entry->free_time.store(now());
  log_.record(Event{now(), EventKind::Free, entry->key, pages});
}

void VfManager::release_struct_now(EntryRecord* entry, unsigned bulk_min_order) {
  std::lock_guard<std::mutex> lock(state_mutex_);
  assert(entry->state.load() == Lifecycle::Unlinked);
  std::vector<BlockRef> bulk;
  std::uint64_t released = 0;
  for (const auto& b : entry->footprint) {
    if (b.order >= bulk_min_order) {
      bulk.push_back(b);
    } else {
      allocator_.free(b);
      released += b.pages();
    }
  }
  // The entry leaves the unreclaimed pool; its leftover bulk blocks show up
  // in telemetry as other-allocated pages until the deferred tail runs.
  unreclaimed_pages_ -= entry->footprint_pages();
  entry->footprint = std::move(bulk);
  entry->state.store(Lifecycle::Freed);
  entry->free_time.store(now());
  log_.record(Event{now(), EventKind::Free, entry->key, released});
}

void VfManager::release_remaining(EntryRecord* entry) {
  std::lock_guard<std::mutex> lock(state_mutex_);
  assert(entry->state.load() == Lifecycle::Freed);
  std::uint64_t released = 0;
  for (const auto& b : entry->footprint) {
    allocator_.free(b);
    released += b.pages();
  }
  entry->footprint.clear();
  if (released > 0)
    log_.record(Event{now(), EventKind::Free, entry->key, released});
}

void VfManager::enqueue_deferred_release(EntryRecord* entry) {
  DeferredItem item;
  item.entry_key = entry->key;
  item.release = [this, entry] { release_footprint(entry); };
  domain_.defer(std::move(item));
}

void VfManager::apply_reclamation(EntryRecord* entry) {
  switch (policy_.effective()) {
    case PolicyKind::SynchronizeRcu:
      domain_.synchronize();
      release_footprint(entry);
      return;
    case PolicyKind::CallRcu:
      enqueue_deferred_release(entry);
      return;
    case PolicyKind::ImmediateFree:
    case PolicyKind::RateLimited:
      break;
  }
  if (backlog_divert_) {
    // The flaw plus the backlog: the VF structure is freed at refcount drop
    // with no grace period, while its bulk resources ride the deferred queue
    // and pile up as long as grace periods are held open.
    release_struct_now(entry, 3);
    DeferredItem item;
    item.entry_key = entry->key;
    item.release = [this, entry] { release_remaining(entry); };
    domain_.defer(std::move(item));
  } else {
    // The flaw under test: refcount hit zero, free with no grace period.
    release_footprint(entry);
  }
}

void VfManager::destroy_vf(std::uint64_t key) {
  if (policy_.rate_limited()) {
    while (!bucket_.try_take(now()))
      std::this_thread::sleep_for(std::chrono::microseconds(100));
  }
  EntryRecord* entry = unlink_vf(key);
  apply_reclamation(entry);
}

std::optional<OomEvent> VfManager::set_num_vfs(std::uint32_t n) {
  if (n > max_vfs_)
    throw Error(Errc::InvalidCount, std::to_string(n) + " > max " + std::to_string(max_vfs_));
  while (num_vfs() < n) {
    if (auto oom = create_vf(next_free_key())) return oom;
  }
  while (num_vfs() > n) destroy_vf(highest_live_key());
  return std::nullopt;
}

std::uint32_t VfManager::num_vfs() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  return static_cast<std::uint32_t>(live_keys_.size());
}

std::uint64_t VfManager::pending_unreclaimed() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  return unreclaimed_pages_;
}

std::uint64_t VfManager::live_vf_pages() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  return live_pages_;
}

std::uint64_t VfManager::next_free_key() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  std::uint64_t expected = 0;
  for (std::uint64_t k : live_keys_) {
    if (k != expected) break;
    ++expected;
  }
  return expected;
}

std::uint64_t VfManager::highest_live_key() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  if (live_keys_.empty()) throw Error(Errc::KeyNotFound, "no live VFs");
  return *live_keys_.rbegin();
}

std::uint64_t VfManager::count_published() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  std::uint64_t n = 0;
  for (const EntryRecord* e : all_entries_)
    if (e->state.load() == Lifecycle::Published) ++n;
  return n;
}

VfManager::TelemetryView VfManager::telemetry_view() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  TelemetryView v;
  v.live_pages = live_pages_;
  v.unreclaimed_pages = unreclaimed_pages_;
  v.num_vfs = static_cast<std::uint32_t>(live_keys_.size());
  FragReport frag = allocator_.frag_report();
  v.allocator_free_pages = frag.free_pages;
  v.allocator_allocated_pages = allocator_.allocated_pages();
  v.per_order_free = std::move(frag.per_order_free);
  v.total_pages = allocator_.total_pages();
  v.max_order = allocator_.max_order();
  return v;
}

std::uint64_t VfManager::audit_unreclaimed_pages() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  std::uint64_t pages = 0;
  for (const EntryRecord* e : all_entries_)
    if (e->state.load() == Lifecycle::Unlinked) pages += e->footprint_pages();
  return pages;
}

}  // namespace rculab
