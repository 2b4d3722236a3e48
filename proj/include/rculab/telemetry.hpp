#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rculab/buddy.hpp"
#include "rculab/clock.hpp"
#include "rculab/rcu.hpp"
#include "rculab/vf_manager.hpp"

namespace rculab {

// The lab's /proc/meminfo analog: one consistent accounting cut.
struct MemSnapshot {
  Tick timestamp = 0;
  std::uint64_t free_pages = 0;
  std::vector<std::uint64_t> per_order_free;
  std::uint64_t slab_analog_pages = 0;        // footprint of Published entries
  std::uint64_t sunreclaim_analog_pages = 0;  // footprint of Unlinked entries
  std::uint32_t num_vfs = 0;
  std::uint64_t grace_periods_completed = 0;
  std::uint64_t callbacks_pending = 0;
  std::int64_t other_allocated_pages = 0;     // allocated pages not owned by VFs
  std::uint64_t total_pages = 0;

  // slab + sunreclaim + free + other == total
  bool accounting_identity_holds() const {
    return static_cast<std::int64_t>(slab_analog_pages + sunreclaim_analog_pages +
                                     free_pages) +
               other_allocated_pages ==
           static_cast<std::int64_t>(total_pages);
  }
};

MemSnapshot take_snapshot(const VfManager& manager, const RcuDomain& domain,
                          const Clock& clock);

struct RunReport;  // defined in harness.hpp

// Canonical JSON (schema "rcu-lab/1"): sorted keys, integers only, so emitted
// reports are byte-stable across parse/re-emit.
std::string emit_json(const RunReport& report);
RunReport parse_report(const std::string& json_text);

// RFC-4180 CSV, one row per snapshot:
// timestamp,free_pages,slab,sunreclaim,num_vfs,order_0..order_max
std::string emit_csv(std::span<const MemSnapshot> snapshots, unsigned max_order);

std::string csv_quote(const std::string& field);

}  // namespace rculab
