#include "rculab/hash_table.hpp"

#include <cassert>

namespace rculab {

const char* lifecycle_name(Lifecycle s) {
  switch (s) {
    case Lifecycle::Published: return "published";
    case Lifecycle::Unlinked: return "unlinked";
    case Lifecycle::Freed: return "freed";
  }
  return "?";
}

namespace {
bool is_power_of_two(std::uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }
constexpr std::uint64_t kHashMultiplier = 0x9E3779B97F4A7C15ull;  // 2^64 / golden ratio
}  // namespace

RcuHashTable::RcuHashTable(std::uint32_t bucket_count, HashConfig hash, const Clock* clock)
    : bucket_count_(bucket_count), hash_(hash), clock_(clock), buckets_(bucket_count) {
  if (!is_power_of_two(bucket_count))
    throw Error(Errc::ConfigError, "bucket count must be a power of two");
  bucket_bits_ = 0;
  while ((1u << bucket_bits_) < bucket_count_) ++bucket_bits_;
  for (auto& b : buckets_) b.store(nullptr);
}

std::uint32_t RcuHashTable::bucket_of(std::uint64_t key) const {
  if (hash_.mode == HashConfig::Mode::Identity)
    return static_cast<std::uint32_t>(key & (bucket_count_ - 1));
  std::uint64_t h = (key ^ hash_.seed) * kHashMultiplier;
  return static_cast<std::uint32_t>(h >> (64 - bucket_bits_));
}

void RcuHashTable::publish(EntryRecord* entry) {
  std::lock_guard<std::mutex> lock(writer_mutex_);
  assert(entry->state.load() == Lifecycle::Published);
  auto& head = buckets_[bucket_of(entry->key)];
  for (EntryRecord* n = head.load(); n != nullptr; n = n->next.load()) {
    if (n->key == entry->key)
      throw Error(Errc::DuplicateKey, "key " + std::to_string(entry->key));
  }
  // Head insertion: fully initialize the node, then swing the head pointer.
  entry->next.store(head.load());
  head.store(entry);
}

EntryRecord* RcuHashTable::unlink(std::uint64_t key) {
  std::lock_guard<std::mutex> lock(writer_mutex_);
  auto& head = buckets_[bucket_of(key)];
  EntryRecord* prev = nullptr;
  for (EntryRecord* n = head.load(); n != nullptr; prev = n, n = n->next.load()) {
    if (n->key != key) continue;
    // Single-link excision; n->next stays intact so readers already past the
    // excision point can finish their walk through n.
    if (prev == nullptr)
      head.store(n->next.load());
    else
      prev->next.store(n->next.load());
    n->state.store(Lifecycle::Unlinked);
    n->unlink_time.store(clock_ ? clock_->now() : 0);
    return n;
  }
  throw Error(Errc::KeyNotFound, "key " + std::to_string(key));
}

LookupCursor::LookupCursor(const RcuHashTable& table, std::uint64_t key)
    : table_(&table), key_(key) {}

bool LookupCursor::advance() {
  if (done_) return false;
  visited_ = nullptr;
  if (!started_) {
    // Head probe: captures the first-node pointer without dereferencing it,
    // so the hop to that node is itself an interleaving point.
    started_ = true;
    pending_ = table_->buckets_[table_->bucket_of(key_)].load();
    if (pending_ == nullptr) {
      cost_ = 1;  // empty-bucket probe
      done_ = true;
      return false;
    }
    return true;
  }
  EntryRecord* node = pending_;
  ++cost_;
  visited_ = node;
  if (node->key == key_) {
    found_ = node;
    done_ = true;
    return false;
  }
  pending_ = node->next.load();
  if (pending_ == nullptr) {
    done_ = true;
    return false;
  }
  return true;
}

LookupResult RcuHashTable::lookup(std::uint64_t key, const ReadGuard& guard) const {
  assert(guard.live());
  (void)guard;
  LookupCursor cur(*this, key);
  while (cur.advance()) {
  }
  return cur.result();
}

std::vector<EntryRecord*> RcuHashTable::audit_unreachable(
    std::span<EntryRecord* const> all_entries) const {
  std::vector<EntryRecord*> violations;
  for (EntryRecord* e : all_entries) {
    if (e->state.load() == Lifecycle::Published) continue;
    for (EntryRecord* n = buckets_[bucket_of(e->key)].load(); n != nullptr;
         n = n->next.load()) {
      if (n == e) {
        violations.push_back(e);
        break;
      }
    }
  }
  return violations;
}

std::uint64_t RcuHashTable::size() const {
  std::uint64_t n = 0;
  for (const auto& head : buckets_) {
    for (EntryRecord* e = head.load(); e != nullptr; e = e->next.load()) ++n;
  }
  return n;
}

void RcuHashTable::debug_relink(EntryRecord* entry) {
  std::lock_guard<std::mutex> lock(writer_mutex_);
  auto& head = buckets_[bucket_of(entry->key)];
  entry->next.store(head.load());
  head.store(entry);
}

}  // namespace rculab
