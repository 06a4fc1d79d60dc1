#pragma once

#include <string>
#include <vector>

#include "nixie/mem_model.hpp"

namespace nixie {

enum class MoveKind : std::uint8_t { FetchForIncoming = 0, EvictFromGpu = 1, Demote = 2, PrefetchToPinned = 3 };

const char* move_kind_name(MoveKind k);

struct Move {
  BlockId block = 0;
  TierId src = TierId::Gpu;
  TierId dst = TierId::Gpu;
  MoveKind kind = MoveKind::FetchForIncoming;

  int tier_distance() const { return std::abs(tier_depth(src) - tier_depth(dst)); }
};

struct MigrationPlan {
  std::vector<Move> moves;
  AppId incoming_app = kNoApp;
  Bytes bytes_in = 0;   // toward the GPU
  Bytes bytes_out = 0;  // evicted from the GPU

  bool empty() const { return moves.empty(); }
  std::string dump() const;  // one move per line: `block_id src dst distance kind`
};

// Victim ordering for evictions: least recently scheduled first. Apps absent
// from the list are appended in ascending AppId order.
struct OrderedPolicy {
  std::vector<AppId> victim_order;
};

struct PlannerConfig {
  Bytes streaming_window = 512 * kMiB;
  OrderedPolicy eviction_policy;
  Bytes pinned_budget = kUnbounded;
};

// Global plan for one context switch: brings every block of `incoming` to the
// GPU, evicting only what is needed; eviction destinations are filled
// top-down, and moves are ordered longest tier distance first.
MigrationPlan plan_switch(AppId incoming, const MemState& state, const PlannerConfig& cfg);

// Whole-chunk eviction victims, ≥ bytes_needed, deterministic.
std::vector<ChunkId> select_evictions(Bytes bytes_needed, const MemState& state,
                                      const std::vector<AppId>& sched_hint);

// Moves `next`'s blocks from PagedHost/Disk up into PinnedHost only, bounded
// by pinned free space minus the streaming window.
MigrationPlan plan_prefetch(AppId next, const MemState& state, const PlannerConfig& cfg);

}  // namespace nixie
