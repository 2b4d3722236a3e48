#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <span>
#include <vector>

#include "rculab/buddy.hpp"
#include "rculab/clock.hpp"
#include "rculab/errors.hpp"
#include "rculab/rcu.hpp"

namespace rculab {

enum class Lifecycle : std::uint8_t { Published, Unlinked, Freed };

const char* lifecycle_name(Lifecycle s);

constexpr Tick kNoTime = ~Tick{0};

// Simulated VF metadata. Records are arena-owned and never deallocated during
// a run; "Freed" means the allocator footprint was returned — the record
// itself stays inspectable, which is what makes use-after-free observable
// instead of fatal.
struct EntryRecord {
  explicit EntryRecord(std::uint64_t k) : key(k) {}
  EntryRecord(const EntryRecord&) = delete;
  EntryRecord& operator=(const EntryRecord&) = delete;

  const std::uint64_t key;
  std::atomic<Lifecycle> state{Lifecycle::Published};
  std::atomic<int> refcount{0};
  std::vector<BlockRef> footprint;   // writer-side only
  std::atomic<Tick> unlink_time{kNoTime};
  std::atomic<Tick> free_time{kNoTime};
  std::atomic<EntryRecord*> next{nullptr};

  std::uint32_t footprint_pages() const {
    std::uint32_t n = 0;
    for (const auto& b : footprint) n += b.pages();
    return n;
  }
};

struct LookupResult {
  EntryRecord* entry = nullptr;  // nullptr: NotFound
  std::uint32_t traversal_cost = 0;

  bool found() const { return entry != nullptr; }
};

struct HashConfig {
  enum class Mode { Multiplicative, Identity };
  Mode mode = Mode::Multiplicative;
  std::uint64_t seed = 0;
};

class RcuHashTable;

// Stepwise chain walk: the first advance() probes the bucket head (capturing
// the first-node pointer without dereferencing it); each later advance()
// visits one node. A scripted actor can therefore interleave at every chain
// hop, and pointers captured before an unlink keep leading to the unlinked
// node. traversal_cost counts nodes visited, minimum 1 for the bare probe.
class LookupCursor {
 public:
  LookupCursor(const RcuHashTable& table, std::uint64_t key);

  // Returns true while more hops remain.
  bool advance();

  bool done() const { return done_; }
  EntryRecord* found() const { return found_; }
  EntryRecord* visited() const { return visited_; }  // node seen by last advance
  std::uint32_t traversal_cost() const { return cost_; }

  LookupResult result() const { return LookupResult{found_, cost_}; }

 private:
  const RcuHashTable* table_;
  std::uint64_t key_;
  EntryRecord* pending_ = nullptr;  // next node to visit
  EntryRecord* visited_ = nullptr;
  EntryRecord* found_ = nullptr;
  std::uint32_t cost_ = 0;
  bool started_ = false;
  bool done_ = false;
};

// Fixed-bucket chained hash table with publication semantics: lockless reads
// under a ReadGuard, head insertion on publish, single-link excision on
// unlink. Unlink removes reachability but never frees.
class RcuHashTable {
 public:
  explicit RcuHashTable(std::uint32_t bucket_count = 64, HashConfig hash = {},
                        const Clock* clock = nullptr);

  void publish(EntryRecord* entry);                 // Errc::DuplicateKey
  EntryRecord* unlink(std::uint64_t key);           // Errc::KeyNotFound

  LookupResult lookup(std::uint64_t key, const ReadGuard& guard) const;
  LookupCursor lookup_begin(std::uint64_t key) const { return LookupCursor(*this, key); }

  // Scripted-mode oracle: every non-Published entry that is still reachable.
  std::vector<EntryRecord*> audit_unreachable(std::span<EntryRecord* const> all_entries) const;

  std::uint32_t bucket_count() const { return bucket_count_; }
  std::uint32_t bucket_of(std::uint64_t key) const;
  std::uint64_t size() const;  // reachable entries, full scan

  // Test hook: re-links an entry at its bucket head without touching state,
  // used to prove the audit catches corrupted chains.
  void debug_relink(EntryRecord* entry);

 private:
  friend class LookupCursor;

  std::uint32_t bucket_count_;
  unsigned bucket_bits_;
  HashConfig hash_;
  const Clock* clock_;
  std::vector<std::atomic<EntryRecord*>> buckets_;
  mutable std::mutex writer_mutex_;
};

}  // namespace rculab
