#include "nixie/planner.hpp"

#include <algorithm>
#include <sstream>

namespace nixie {

const char* move_kind_name(MoveKind k) {
  switch (k) {
    case MoveKind::FetchForIncoming: return "fetch";
    case MoveKind::EvictFromGpu: return "evict";
    case MoveKind::Demote: return "demote";
    case MoveKind::PrefetchToPinned: return "prefetch";
  }
  return "?";
}

std::string MigrationPlan::dump() const {
  std::ostringstream out;
  for (const Move& m : moves) {
    out << m.block << ' ' << tier_name(m.src) << ' ' << tier_name(m.dst) << ' '
        << m.tier_distance() << ' ' << move_kind_name(m.kind) << '\n';
  }
  return out.str();
}

namespace {

Bytes saturating_free(const TierState& t, Bytes budget) {
  Bytes cap = t.unbounded() ? budget : std::min(t.capacity, budget);
  if (cap == kUnbounded) return kUnbounded;
  Bytes committed = t.used + t.reserved + t.window_reserved;
  return committed >= cap ? 0 : cap - committed;
}

// Victim order: hinted apps first, then any remaining apps ascending.
std::vector<AppId> victim_order(const MemState& state, const std::vector<AppId>& hint, AppId exclude) {
  std::vector<AppId> order;
  for (AppId a : hint)
    if (a != exclude) order.push_back(a);
  for (AppId a : state.apps())
    if (a != exclude && std::find(order.begin(), order.end(), a) == order.end()) order.push_back(a);
  return order;
}

// Chunks of one app ordered largest footprint first, then ascending id.
std::vector<ChunkId> ordered_chunks(const MemState& state, AppId app) {
  std::vector<ChunkId> chunks = state.chunks_of(app);
  std::sort(chunks.begin(), chunks.end(), [&](ChunkId a, ChunkId b) {
    Bytes fa = state.chunk(a).footprint();
    Bytes fb = state.chunk(b).footprint();
    if (fa != fb) return fa > fb;
    return a < b;
  });
  return chunks;
}

// Blocks of non-incoming apps resident in `tier`, in victim order, trimmed to
// exactly `bytes` (bytes is always block-aligned).
std::vector<BlockId> pick_victim_blocks(const MemState& state, const std::vector<AppId>& order,
                                        TierId tier, Bytes bytes) {
  std::vector<BlockId> out;
  if (bytes == 0) return out;
  for (AppId app : order) {
    for (ChunkId c : ordered_chunks(state, app)) {
      for (BlockId b : state.chunk(c).blocks) {
        const Block& blk = state.block(b);
        if (blk.loc.is_resident() && blk.loc.tier == tier) {
          out.push_back(b);
          if (out.size() * kBlockBytes >= bytes) return out;
        }
      }
    }
  }
  return out;
}

struct MoveSort {
  bool operator()(const Move& a, const Move& b) const {
    int da = a.tier_distance(), db = b.tier_distance();
    if (da != db) return da > db;
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    return a.block < b.block;
  }
};

}  // namespace

std::vector<ChunkId> select_evictions(Bytes bytes_needed, const MemState& state,
                                      const std::vector<AppId>& sched_hint) {
  std::vector<ChunkId> out;
  if (bytes_needed == 0) return out;
  Bytes got = 0;
  for (AppId app : victim_order(state, sched_hint, kNoApp)) {
    for (ChunkId c : ordered_chunks(state, app)) {
      Bytes resident = 0;
      for (BlockId b : state.chunk(c).blocks) {
        const Block& blk = state.block(b);
        if (blk.loc.is_resident() && blk.loc.tier == TierId::Gpu) resident += kBlockBytes;
      }
      if (resident == 0) continue;
      out.push_back(c);
      got += resident;
      if (got >= bytes_needed) return out;
    }
  }
  throw SimError(Err::InsufficientEvictable,
                 "need " + format_bytes(bytes_needed) + ", evictable " + format_bytes(got));
}

MigrationPlan plan_switch(AppId incoming, const MemState& state, const PlannerConfig& cfg) {
  const std::vector<ChunkId>& chunks = state.chunks_of(incoming);
  if (chunks.empty()) throw SimError(Err::UnknownApp, "app " + std::to_string(incoming));

  const TierState& gpu = state.tier(TierId::Gpu);
  Bytes footprint = state.app_footprint(incoming);
  if (!gpu.unbounded() && footprint > gpu.capacity)
    throw SimError(Err::AppTooLarge, "footprint " + format_bytes(footprint) + " exceeds GPU " +
                                         format_bytes(gpu.capacity));

  MigrationPlan plan;
  plan.incoming_app = incoming;

  // Fetches: every incoming block not already on the GPU. The planner expects
  // a quiescent snapshot; in-flight blocks are a caller bug.
  Bytes incoming_pinned = 0;   // departures that will free pinned space
  Bytes incoming_below = 0;    // needs transit through pinned on its way up
  Bytes incoming_paged = 0;
  for (ChunkId c : chunks) {
    for (BlockId b : state.chunk(c).blocks) {
      const Block& blk = state.block(b);
      if (!blk.loc.is_resident())
        throw SimError(Err::InvalidState, "plan requested with block in flight");
      if (blk.loc.tier == TierId::Gpu) continue;
      plan.moves.push_back({b, blk.loc.tier, TierId::Gpu, MoveKind::FetchForIncoming});
      plan.bytes_in += kBlockBytes;
      if (blk.loc.tier == TierId::PinnedHost) incoming_pinned += kBlockBytes;
      if (tier_depth(blk.loc.tier) > tier_depth(TierId::PinnedHost)) incoming_below += kBlockBytes;
      if (blk.loc.tier == TierId::PagedHost) incoming_paged += kBlockBytes;
    }
  }

  Bytes gpu_free = gpu.unbounded() ? kUnbounded : saturating_free(gpu, kUnbounded);
  plan.bytes_out = plan.bytes_in > gpu_free ? plan.bytes_in - gpu_free : 0;

  std::vector<AppId> order = victim_order(state, cfg.eviction_policy.victim_order, incoming);

  // Pinned-space arithmetic. Departing incoming blocks free pinned space; the
  // streaming window and a transit lane for below-pinned fetches must stay
  // clear, demoting cold pinned residents if the headroom is not there.
  const TierState& pinned = state.tier(TierId::PinnedHost);
  Bytes window_need = plan.bytes_out > 0 ? cfg.streaming_window : 0;
  Bytes lane_need = incoming_below > 0 ? std::min(incoming_below, cfg.streaming_window) : 0;
  Bytes headroom = window_need + lane_need;
  Bytes pinned_free = saturating_free(pinned, cfg.pinned_budget);
  Bytes projected = pinned_free == kUnbounded ? kUnbounded : pinned_free + incoming_pinned;

  std::vector<Move> demotes;
  if (projected != kUnbounded && projected < headroom) {
    Bytes deficit = headroom - projected;
    deficit = block_count_for(deficit) * kBlockBytes;
    for (BlockId b : pick_victim_blocks(state, order, TierId::PinnedHost, deficit))
      demotes.push_back({b, TierId::PinnedHost, TierId::PagedHost, MoveKind::Demote});
    projected += demotes.size() * kBlockBytes;
  }
  Bytes retain_pinned = 0;
  if (projected == kUnbounded)
    retain_pinned = plan.bytes_out;
  else
    retain_pinned = std::min(plan.bytes_out, projected > headroom ? projected - headroom : 0);
  retain_pinned -= retain_pinned % kBlockBytes;

  // Paged allotment, leaving a transit lane when the remainder spills to disk.
  const TierState& paged = state.tier(TierId::PagedHost);
  Bytes demoted_bytes = demotes.size() * kBlockBytes;
  Bytes paged_free = saturating_free(paged, kUnbounded);
  Bytes paged_projected = paged_free;
  if (paged_projected != kUnbounded) {
    paged_projected += incoming_paged;
    paged_projected = paged_projected > demoted_bytes ? paged_projected - demoted_bytes : 0;
  }
  Bytes rem = plan.bytes_out - retain_pinned;
  Bytes retain_paged;
  if (paged_projected == kUnbounded) {
    retain_paged = rem;
  } else {
    retain_paged = std::min(rem, paged_projected);
    if (rem > retain_paged) {
      Bytes paged_lane = std::min(rem - retain_paged, cfg.streaming_window);
      retain_paged = retain_paged > paged_lane ? retain_paged - paged_lane : 0;
    }
  }
  retain_paged -= retain_paged % kBlockBytes;
  Bytes to_disk = rem - retain_paged;
  if (to_disk > 0 && state.tier(TierId::Disk).capacity < to_disk)
    throw SimError(Err::CapacityExceeded, "hierarchy cannot absorb " + format_bytes(to_disk));

  Bytes assigned = 0;
  for (BlockId b : pick_victim_blocks(state, order, TierId::Gpu, plan.bytes_out)) {
    TierId dst;
    if (assigned < retain_pinned)
      dst = TierId::PinnedHost;
    else if (assigned < retain_pinned + retain_paged)
      dst = TierId::PagedHost;
    else
      dst = TierId::Disk;
    plan.moves.push_back({b, TierId::Gpu, dst, MoveKind::EvictFromGpu});
    assigned += kBlockBytes;
  }
  if (assigned < plan.bytes_out)
    throw SimError(Err::InsufficientEvictable, "only " + format_bytes(assigned) + " evictable");

  plan.moves.insert(plan.moves.end(), demotes.begin(), demotes.end());
  std::sort(plan.moves.begin(), plan.moves.end(), MoveSort{});
  return plan;
}

MigrationPlan plan_prefetch(AppId next, const MemState& state, const PlannerConfig& cfg) {
  MigrationPlan plan;
  plan.incoming_app = next;
  const TierState& pinned = state.tier(TierId::PinnedHost);
  Bytes free = saturating_free(pinned, cfg.pinned_budget);
  if (free != kUnbounded)
    free = free > cfg.streaming_window ? free - cfg.streaming_window : 0;
  Bytes budget = free == kUnbounded ? kUnbounded : free - free % kBlockBytes;
  if (budget == 0) return plan;

  Bytes planned = 0;
  for (ChunkId c : state.chunks_of(next)) {
    for (BlockId b : state.chunk(c).blocks) {
      const Block& blk = state.block(b);
      if (!blk.loc.is_resident()) continue;
      if (tier_depth(blk.loc.tier) <= tier_depth(TierId::PinnedHost)) continue;
      if (planned + kBlockBytes > budget) break;
      plan.moves.push_back({b, blk.loc.tier, TierId::PinnedHost, MoveKind::PrefetchToPinned});
      planned += kBlockBytes;
    }
    if (planned + kBlockBytes > budget) break;
  }
  std::sort(plan.moves.begin(), plan.moves.end(), MoveSort{});
  return plan;
}

}  // namespace nixie
