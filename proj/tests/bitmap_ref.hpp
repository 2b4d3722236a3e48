#pragma once

// Test-side reference model for the buddy allocator: a flat page bitmap with
// first-fit over aligned runs. Placement mirrors the allocator under test
// (apply() marks the address it chose); feasibility is judged independently
// by scanning the bitmap, and the canonical maximal-coalesced partition is
// recomputed from raw pages.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace rculab_test {

class BitmapRef {
 public:
  explicit BitmapRef(std::uint32_t pages) : used_(pages, false) {}

  // Does any aligned free run of 2^order pages exist?
  bool can_alloc(unsigned order) const {
    const std::uint32_t size = 1u << order;
    if (size > used_.size()) return false;
    for (std::uint32_t start = 0; start + size <= used_.size(); start += size) {
      if (run_free(start, size)) return true;
    }
    return false;
  }

  void apply_alloc(std::uint32_t start, unsigned order) {
    const std::uint32_t size = 1u << order;
    for (std::uint32_t i = start; i < start + size; ++i) {
      if (used_[i]) throw std::logic_error("reference: allocating a used page");
      used_[i] = true;
    }
    if (start % size != 0) throw std::logic_error("reference: misaligned allocation");
  }

  void apply_free(std::uint32_t start, unsigned order) {
    const std::uint32_t size = 1u << order;
    for (std::uint32_t i = start; i < start + size; ++i) {
      if (!used_[i]) throw std::logic_error("reference: freeing a free page");
      used_[i] = false;
    }
  }

  std::uint64_t free_pages() const {
    std::uint64_t n = 0;
    for (bool u : used_)
      if (!u) ++n;
    return n;
  }

  // The maximal-coalesced buddy partition is unique given the free set: an
  // aligned free block belongs to it iff its parent block is not fully free.
  std::vector<std::uint64_t> canonical_histogram(unsigned max_order) const {
    std::vector<std::uint64_t> hist(max_order + 1, 0);
    for (unsigned k = 0; k <= max_order; ++k) {
      const std::uint32_t size = 1u << k;
      for (std::uint32_t start = 0; start + size <= used_.size(); start += size) {
        if (!run_free(start, size)) continue;
        if (k < max_order) {
          std::uint32_t parent = start & ~((size << 1) - 1);
          if (parent + (size << 1) <= used_.size() && run_free(parent, size << 1))
            continue;  // the parent (or higher) represents this block
        }
        ++hist[k];
      }
    }
    return hist;
  }

 private:
  bool run_free(std::uint32_t start, std::uint32_t size) const {
    for (std::uint32_t i = start; i < start + size; ++i)
      if (used_[i]) return false;
    return true;
  }

  std::vector<bool> used_;
};

}  // namespace rculab_test
