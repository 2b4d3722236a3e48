#include "rculab/buddy.hpp"

#include <algorithm>
#include <cassert>

namespace rculab {

namespace {
bool is_power_of_two(std::uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }
}  // namespace

double FragReport::unusable_free_fraction(unsigned order) const {
  if (free_pages == 0) return 0.0;
  std::uint64_t usable = 0;
  for (unsigned k = order; k < per_order_free.size(); ++k)
    usable += per_order_free[k] << k;
  return 1.0 - static_cast<double>(usable) / static_cast<double>(free_pages);
}

BuddyAllocator::BuddyAllocator(std::uint32_t total_pages) : total_pages_(total_pages) {
  if (!is_power_of_two(total_pages))
    throw Error(Errc::ConfigError, "arena size must be a power of two");
  max_order_ = 0;
  while ((1u << (max_order_ + 1)) <= total_pages) ++max_order_;
  free_lists_.resize(max_order_ + 1);
  failed_by_order_.resize(max_order_ + 1, 0);
  free_lists_[max_order_].insert(0);
}

void BuddyAllocator::insert_free(PageAddr start, unsigned order) {
  free_lists_[order].insert(start);
}

BlockRef BuddyAllocator::carve(PageAddr start, unsigned found_order, unsigned want_order) {
  free_lists_[found_order].erase(start);
  // Split keeps the low half; the high half returns to its free list.
  for (unsigned k = found_order; k > want_order; --k) {
    insert_free(start + (1u << (k - 1)), k - 1);
  }
  return BlockRef{start, want_order};
}

AllocResult BuddyAllocator::alloc(unsigned order, bool movable) {
  ++alloc_calls_;
  if (order > max_order_) {
    ++failed_by_order_[std::min<unsigned>(order, max_order_)];
    return AllocFailure{order, frag_report()};
  }
  for (unsigned k = order; k <= max_order_; ++k) {
    if (free_lists_[k].empty()) continue;
    BlockRef ref = carve(*free_lists_[k].begin(), k, order);
    allocated_.emplace(ref.start, AllocInfo{order, movable});
    freed_ledger_.erase(freed_ledger_.lower_bound(ref.start),
                        freed_ledger_.lower_bound(ref.start + ref.pages()));
#ifndef NDEBUG
    verify_invariants();
#endif
    return ref;
  }
  ++failed_by_order_[order];
  return AllocFailure{order, frag_report()};
}

void BuddyAllocator::free_and_coalesce(PageAddr start, unsigned order) {
  while (order < max_order_) {
    PageAddr buddy = start ^ (1u << order);
    auto it = free_lists_[order].find(buddy);
    if (it == free_lists_[order].end()) break;
    free_lists_[order].erase(it);
    start = std::min(start, buddy);
    ++order;
  }
  insert_free(start, order);
}

void BuddyAllocator::free(BlockRef block) {
  auto it = allocated_.find(block.start);
  if (it == allocated_.end() || it->second.order != block.order) {
    auto ledger = freed_ledger_.find(block.start);
    if (ledger != freed_ledger_.end() && ledger->second == block.order)
      throw Error(Errc::DoubleFree, "block " + std::to_string(block.start) +
                                        " order " + std::to_string(block.order));
    throw Error(Errc::UnknownBlock, "block " + std::to_string(block.start) +
                                        " order " + std::to_string(block.order));
  }
  allocated_.erase(it);
  freed_ledger_[block.start] = block.order;
  free_and_coalesce(block.start, block.order);
#ifndef NDEBUG
  verify_invariants();
#endif
}

std::uint64_t BuddyAllocator::free_pages() const {
  std::uint64_t total = 0;
  for (unsigned k = 0; k <= max_order_; ++k)
    total += static_cast<std::uint64_t>(free_lists_[k].size()) << k;
  return total;
}

std::uint64_t BuddyAllocator::allocated_pages() const {
  std::uint64_t total = 0;
  for (const auto& [start, info] : allocated_) total += 1u << info.order;
  return total;
}

FragReport BuddyAllocator::frag_report() const {
  FragReport r;
  r.per_order_free.resize(max_order_ + 1, 0);
  for (unsigned k = 0; k <= max_order_; ++k) {
    r.per_order_free[k] = free_lists_[k].size();
    r.free_pages += static_cast<std::uint64_t>(free_lists_[k].size()) << k;
    if (!free_lists_[k].empty()) r.highest_allocatable_order = static_cast<int>(k);
  }
  return r;
}

std::uint32_t BuddyAllocator::compact(std::uint32_t move_budget) {
  std::uint32_t moved = 0;
  bool progressed = true;
  while (progressed) {
    progressed = false;
    // Highest-addressed movable blocks first, into the lowest free slot of
    // the same order. Same-order placement never splits a larger free block,
    // so compaction cannot lower the highest allocatable order.
    std::vector<std::pair<PageAddr, AllocInfo>> movables;
    for (const auto& [start, info] : allocated_)
      if (info.movable) movables.emplace_back(start, info);
    std::sort(movables.begin(), movables.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    for (const auto& [start, info] : movables) {
      std::uint32_t size = 1u << info.order;
      if (size > move_budget - moved) continue;
      const auto& slots = free_lists_[info.order];
      if (slots.empty()) continue;
      PageAddr dest = *slots.begin();
      if (dest >= start) continue;
      carve(dest, info.order, info.order);
      allocated_.emplace(dest, info);
      allocated_.erase(start);
      free_and_coalesce(start, info.order);
      freed_ledger_.erase(freed_ledger_.lower_bound(dest),
                          freed_ledger_.lower_bound(dest + size));
      freed_ledger_[start] = info.order;
      moved += size;
      progressed = true;
#ifndef NDEBUG
      verify_invariants();
#endif
    }
    if (moved >= move_budget) break;
  }
  return moved;
}

void BuddyAllocator::verify_invariants() const {
  std::uint64_t accounted = free_pages() + allocated_pages();
  if (accounted != total_pages_)
    throw std::logic_error("buddy conservation violated: " + std::to_string(accounted) +
                           " != " + std::to_string(total_pages_));
  for (unsigned k = 0; k <= max_order_; ++k) {
    for (PageAddr start : free_lists_[k]) {
      if (start % (1u << k) != 0)
        throw std::logic_error("misaligned free block");
      if (k < max_order_ && free_lists_[k].count(start ^ (1u << k)))
        throw std::logic_error("free buddies left uncoalesced at order " + std::to_string(k));
    }
  }
  for (const auto& [start, info] : allocated_) {
    if (start % (1u << info.order) != 0)
      throw std::logic_error("misaligned allocated block");
  }
}

}  // namespace rculab
