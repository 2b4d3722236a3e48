#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rculab/buddy.hpp"
#include "rculab/events.hpp"
#include "rculab/hash_table.hpp"
#include "rculab/rcu.hpp"
#include "rculab/token_bucket.hpp"

namespace rculab {

// Allocation shape of one simulated VF: (order, count) pairs, all unmovable.
struct VfFootprintSpec {
  struct Block {
    unsigned order;
    unsigned count;
  };
  std::vector<Block> blocks;

  // One order-3 block, two order-1, four order-0: 16 pages per VF.
  static VfFootprintSpec standard() {
    return VfFootprintSpec{{{3, 1}, {1, 2}, {0, 4}}};
  }

  std::uint32_t pages_per_vf() const {
    std::uint32_t n = 0;
    for (const auto& b : blocks) n += b.count * (1u << b.order);
    return n;
  }
};

enum class PolicyKind : std::uint8_t { ImmediateFree, SynchronizeRcu, CallRcu, RateLimited };

struct ReclamationPolicy {
  PolicyKind kind = PolicyKind::ImmediateFree;
  PolicyKind inner = PolicyKind::ImmediateFree;  // RateLimited wraps this
  std::uint32_t rate_per_second = 10;
  std::uint32_t burst = 4;

  PolicyKind effective() const { return kind == PolicyKind::RateLimited ? inner : kind; }
  bool rate_limited() const { return kind == PolicyKind::RateLimited; }

  static ReclamationPolicy immediate() { return {PolicyKind::ImmediateFree}; }
  static ReclamationPolicy synchronize_rcu() { return {PolicyKind::SynchronizeRcu}; }
  static ReclamationPolicy call_rcu() { return {PolicyKind::CallRcu}; }
  static ReclamationPolicy rate_limited(PolicyKind inner, std::uint32_t rate,
                                        std::uint32_t burst) {
    return {PolicyKind::RateLimited, inner, rate, burst};
  }

  // CLI names: immediate | sync | defer | ratelimit. Errc::ConfigError otherwise.
  static ReclamationPolicy from_name(const std::string& name);
  std::string name() const;
};

// Driver analog: creates and destroys simulated VFs against the table and
// allocator, reclaiming per the configured policy. One writer context at a
// time; the internal mutex only fences the live-mode grace driver, whose
// deferred callbacks land on release_footprint.
class VfManager {
 public:
  VfManager(RcuHashTable& table, BuddyAllocator& allocator, RcuDomain& domain,
            ReclamationPolicy policy, VfFootprintSpec footprint, std::uint32_t max_vfs,
            EventLog& log, const Clock* clock);

  // --- primitives (scripted actors compose these with yields) ---

  // Allocates the footprint and publishes a fresh entry. On allocation
  // failure rolls the partial footprint back and reports the OOM.
  std::optional<OomEvent> create_vf(std::uint64_t key);

  // Unlink from the table; the entry stays dereferenceable (stale window).
  EntryRecord* unlink_vf(std::uint64_t key);

  // Return the whole footprint to the allocator; Unlinked -> Freed.
  void release_footprint(EntryRecord* entry);

  // The refcount-drop path: frees the entry's small object blocks (the VF
  // structure itself) immediately, marking it Freed, while blocks of
  // bulk_min_order and above stay behind for deferred reclamation.
  void release_struct_now(EntryRecord* entry, unsigned bulk_min_order);

  // Deferred tail of release_struct_now: return whatever blocks remain.
  void release_remaining(EntryRecord* entry);

  // call_rcu analog: park the whole release until a grace period elapses.
  void enqueue_deferred_release(EntryRecord* entry);

  // Policy tail of a destroy, minus the rate-limit gate: immediate release,
  // blocking synchronize-then-release, or deferred release.
  void apply_reclamation(EntryRecord* entry);

  // --- composed blocking forms (live mode and plain tests) ---

  std::optional<OomEvent> set_num_vfs(std::uint32_t n);  // Errc::InvalidCount
  void destroy_vf(std::uint64_t key);                    // Errc::KeyNotFound

  // --- queries ---

  std::uint32_t num_vfs() const;
  std::uint32_t max_vfs() const { return max_vfs_; }
  std::uint64_t pending_unreclaimed() const;  // pages held by Unlinked entries
  std::uint64_t live_vf_pages() const;        // pages held by Published entries
  std::uint64_t next_free_key() const;        // smallest non-live key
  std::uint64_t highest_live_key() const;

  std::span<EntryRecord* const> entries() const { return all_entries_; }
  std::uint64_t count_published() const;  // brute-force audit of num_vfs
  std::uint64_t audit_unreclaimed_pages() const;

  const ReclamationPolicy& policy() const { return policy_; }
  const VfFootprintSpec& footprint() const { return footprint_; }
  TokenBucket& token_bucket() { return bucket_; }
  RcuDomain& domain() { return domain_; }
  RcuHashTable& table() { return table_; }
  BuddyAllocator& allocator() { return allocator_; }
  EventLog& log() { return log_; }
  std::mutex& state_mutex() const { return state_mutex_; }

  // Backlog injection: divert releases through the deferred queue (except
  // under SynchronizeRcu, which already waited before freeing).
  void set_backlog_divert(bool on) { backlog_divert_ = on; }
  bool backlog_divert() const { return backlog_divert_; }

  // One consistent accounting cut under a single lock acquisition.
  struct TelemetryView {
    std::uint64_t live_pages = 0;
    std::uint64_t unreclaimed_pages = 0;
    std::uint32_t num_vfs = 0;
    std::uint64_t allocator_free_pages = 0;
    std::uint64_t allocator_allocated_pages = 0;
    std::vector<std::uint64_t> per_order_free;
    std::uint32_t total_pages = 0;
    unsigned max_order = 0;
  };
  TelemetryView telemetry_view() const;

  Tick now() const { return clock_ ? clock_->now() : 0; }

 private:
  RcuHashTable& table_;
  BuddyAllocator& allocator_;
  RcuDomain& domain_;
  ReclamationPolicy policy_;
  VfFootprintSpec footprint_;
  std::uint32_t max_vfs_;
  EventLog& log_;
  const Clock* clock_;
  TokenBucket bucket_;
  bool backlog_divert_ = false;

  mutable std::mutex state_mutex_;
  std::vector<std::unique_ptr<EntryRecord>> arena_;
  std::vector<EntryRecord*> all_entries_;
  std::set<std::uint64_t> live_keys_;
  std::uint64_t live_pages_ = 0;
  std::uint64_t unreclaimed_pages_ = 0;
};

}  // namespace rculab
