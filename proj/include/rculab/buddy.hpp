#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <variant>
#include <vector>

#include "rculab/errors.hpp"

namespace rculab {

using PageAddr = std::uint32_t;

struct BlockRef {
  PageAddr start = 0;
  unsigned order = 0;

  std::uint32_t pages() const { return 1u << order; }
  bool operator==(const BlockRef&) const = default;
};

struct FragReport {
  std::uint64_t free_pages = 0;
  std::vector<std::uint64_t> per_order_free;  // index = order
  int highest_allocatable_order = -1;         // -1: nothing free

  // Fraction of free pages sitting in blocks too small to serve `order`.
  double unusable_free_fraction(unsigned order) const;
};

struct AllocFailure {
  unsigned order = 0;
  FragReport report;
};

using AllocResult = std::variant<BlockRef, AllocFailure>;

inline bool alloc_ok(const AllocResult& r) { return std::holds_alternative<BlockRef>(r); }

// Simulated physical-page buddy allocator. Pure function of its call history:
// allocation always takes the lowest-addressed free block of the smallest
// sufficient order, splits keep the low half.
class BuddyAllocator {
 public:
  explicit BuddyAllocator(std::uint32_t total_pages);

  AllocResult alloc(unsigned order, bool movable);
  void free(BlockRef block);  // Errc::DoubleFree, Errc::UnknownBlock

  FragReport frag_report() const;

  // Relocates movable blocks toward the lowest addresses (allocate-copy-free),
  // spending at most move_budget pages. Returns pages moved.
  std::uint32_t compact(std::uint32_t move_budget);

  std::uint32_t total_pages() const { return total_pages_; }
  unsigned max_order() const { return max_order_; }
  std::uint64_t free_pages() const;
  std::uint64_t allocated_pages() const;
  std::uint64_t alloc_calls() const { return alloc_calls_; }
  const std::vector<std::uint64_t>& failed_allocs_by_order() const { return failed_by_order_; }

  bool is_allocated(PageAddr start) const { return allocated_.count(start) != 0; }

  // Conservation + alignment + no-free-buddies audit; throws on violation.
  void verify_invariants() const;

 private:
  struct AllocInfo {
    unsigned order;
    bool movable;
  };

  void insert_free(PageAddr start, unsigned order);          // no coalescing
  void free_and_coalesce(PageAddr start, unsigned order);
  BlockRef carve(PageAddr start, unsigned found_order, unsigned want_order);

  std::uint32_t total_pages_;
  unsigned max_order_;
  std::vector<std::set<PageAddr>> free_lists_;   // per order, address-ordered
  std::map<PageAddr, AllocInfo> allocated_;
  std::map<PageAddr, unsigned> freed_ledger_;    // distinguishes DoubleFree from UnknownBlock

  std::uint64_t alloc_calls_ = 0;
  std::vector<std::uint64_t> failed_by_order_;
};

}  // namespace rculab
