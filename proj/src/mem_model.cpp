#include "nixie/mem_model.hpp"

#include <algorithm>

namespace nixie {

const char* tier_name(TierId t) {
  switch (t) {
    case TierId::Gpu: return "gpu";
    case TierId::PinnedHost: return "pinned";
    case TierId::PagedHost: return "paged";
    case TierId::Disk: return "disk";
  }
  return "?";
}

TierId parse_tier(const std::string& name) {
  if (name == "gpu") return TierId::Gpu;
  if (name == "pinned") return TierId::PinnedHost;
  if (name == "paged") return TierId::PagedHost;
  if (name == "disk") return TierId::Disk;
  throw SimError(Err::ParseError, "unknown tier '" + name + "'");
}

MemState::MemState() {
  for (int i = 0; i < kTierCount; ++i) {
    tiers_[i].tier = tier_at_depth(i);
    tiers_[i].capacity = kUnbounded;
  }
}

void MemState::set_capacity(TierId tier, Bytes capacity) {
  tier_mut(tier).capacity = capacity;
}

Block& MemState::block_mut(BlockId id) {
  if (id >= blocks_.size() || !blocks_[id].alive)
    throw SimError(Err::InvalidState, "dead or unknown block " + std::to_string(id));
  return blocks_[id];
}

const Block& MemState::block(BlockId id) const {
  if (id >= blocks_.size() || !blocks_[id].alive)
    throw SimError(Err::InvalidState, "dead or unknown block " + std::to_string(id));
  return blocks_[id];
}

std::vector<ChunkId> MemState::allocate(AppId app, Bytes size, TierId initial_tier) {
  if (size == 0) throw SimError(Err::InvalidState, "zero-size allocation");
  std::uint64_t total_blocks = block_count_for(size);
  Bytes footprint = total_blocks * kBlockBytes;
  TierState& dst = tier_mut(initial_tier);
  if (!dst.unbounded() && footprint > dst.free_bytes())
    throw SimError(Err::CapacityExceeded,
                   std::string(tier_name(initial_tier)) + " cannot fit " + format_bytes(footprint));

  std::vector<ChunkId> out;
  Bytes remaining = size;
  while (remaining > 0) {
    Bytes chunk_size = std::min<Bytes>(remaining, kChunkMaxBytes);
    Chunk c;
    c.id = chunks_.size();
    c.app = app;
    c.requested_size = chunk_size;
    c.logical_base = next_logical_base_++;
    std::uint64_t n = block_count_for(chunk_size);
    c.blocks.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      Block b;
      b.id = blocks_.size();
      b.chunk = c.id;
      b.app = app;
      b.loc = Location::resident(initial_tier);
      c.blocks.push_back(b.id);
      blocks_.push_back(b);
      if (initial_tier == TierId::PinnedHost) charge_pinned_resident(app, kBlockBytes);
    }
    dst.used += c.footprint();
    app_chunks_[app].push_back(c.id);
    out.push_back(c.id);
    chunks_.push_back(std::move(c));
    remaining -= chunk_size;
  }
  note_pinned_peak();
  return out;
}

Bytes MemState::free_chunk(AppId app, ChunkId id) {
  if (id >= chunks_.size() || !chunks_[id].alive)
    throw SimError(Err::UnknownChunk, "chunk " + std::to_string(id));
  Chunk& c = chunks_[id];
  if (c.app != app)
    throw SimError(Err::UnknownChunk, "chunk " + std::to_string(id) + " not owned by app");
  for (BlockId b : c.blocks)
    if (!blocks_[b].loc.is_resident())
      throw SimError(Err::ChunkBusy, "chunk " + std::to_string(id) + " has a block in flight");

  Bytes released = c.footprint();
  for (BlockId bid : c.blocks) {
    Block& b = blocks_[bid];
    TierState& t = tier_mut(b.loc.tier);
    t.used -= kBlockBytes;
    if (b.loc.tier == TierId::PinnedHost) {
      charge_pinned_resident(app, -static_cast<std::int64_t>(kBlockBytes));
      if (b.in_window && window_) {
        t.window_reserved += kBlockBytes;
        window_->occupied -= kBlockBytes;
      }
    }
    b.alive = false;
  }
  c.alive = false;
  auto& list = app_chunks_[app];
  list.erase(std::remove(list.begin(), list.end(), id), list.end());
  return released;
}

void MemState::begin_move(BlockId id, TierId dst, bool use_window) {
  Block& b = block_mut(id);
  if (!b.loc.is_resident())
    throw SimError(Err::InvalidState, "block " + std::to_string(id) + " already in flight");
  TierId src = b.loc.tier;
  if (src == dst) throw SimError(Err::InvalidState, "move to the same tier");
  if (!tiers_adjacent(src, dst))
    throw SimError(Err::InvalidState, "non-adjacent move " + std::string(tier_name(src)) + "->" + tier_name(dst));

  TierState& d = tier_mut(dst);
  if (use_window) {
    if (!window_ || window_->tier != dst)
      throw SimError(Err::InvalidState, "no streaming window on destination");
    if (d.window_reserved < kBlockBytes)
      throw SimError(Err::CapacityExceeded, "streaming window exhausted");
    d.window_reserved -= kBlockBytes;
    d.reserved += kBlockBytes;
    b.in_window = true;
    window_->occupied += kBlockBytes;
  } else {
    if (!d.unbounded() && d.free_bytes() < kBlockBytes)
      throw SimError(Err::CapacityExceeded, std::string(tier_name(dst)) + " full");
    d.reserved += kBlockBytes;
  }
  if (src == TierId::PinnedHost) {
    charge_pinned_resident(b.app, -static_cast<std::int64_t>(kBlockBytes));
  }
  b.loc = Location::in_flight(src, dst);
  note_pinned_peak();
}

void MemState::commit_move(BlockId id, TierId dst) {
  Block& b = block_mut(id);
  if (b.loc.is_resident())
    throw SimError(Err::NotInFlight, "block " + std::to_string(id) + " is resident");
  if (b.loc.dst != dst)
    throw SimError(Err::NotInFlight, "block " + std::to_string(id) + " in flight to a different tier");
  TierId src = b.loc.tier;
  TierState& s = tier_mut(src);
  TierState& d = tier_mut(dst);
  s.used -= kBlockBytes;
  d.reserved -= kBlockBytes;
  d.used += kBlockBytes;
  // Leaving pinned returns the block's slot to the window it came from.
  if (src == TierId::PinnedHost && b.in_window && dst != TierId::PinnedHost) {
    if (window_) {
      s.window_reserved += kBlockBytes;
      window_->occupied -= kBlockBytes;
    }
    b.in_window = false;
  }
  if (dst == TierId::PinnedHost) charge_pinned_resident(b.app, kBlockBytes);
  b.loc = Location::resident(dst);
  note_pinned_peak();
}

PinnedUsage MemState::pinned_usage() const {
  PinnedUsage u;
  u.global = pinned_global_;
  u.per_app = pinned_by_app_;
  return u;
}

void MemState::reserve_window(TierId tier, Bytes size, AppId owner) {
  if (window_) throw SimError(Err::InvalidState, "streaming window already reserved");
  TierState& t = tier_mut(tier);
  if (!t.unbounded() && t.free_bytes() < size)
    throw SimError(Err::CapacityExceeded, "no room for streaming window");
  t.window_reserved += size;
  window_ = StreamingWindow{tier, size, 0, owner};
  note_pinned_peak();
}

void MemState::release_window() {
  if (!window_) return;
  TierState& t = tier_mut(window_->tier);
  // Blocks parked in the window stay resident as ordinary occupants.
  Bytes remainder = window_->size - window_->occupied;
  t.window_reserved -= remainder;
  for (Block& b : blocks_)
    if (b.alive && b.in_window) b.in_window = false;
  window_.reset();
}

bool MemState::has_chunk(ChunkId id) const { return id < chunks_.size() && chunks_[id].alive; }

const Chunk& MemState::chunk(ChunkId id) const {
  if (!has_chunk(id)) throw SimError(Err::UnknownChunk, "chunk " + std::to_string(id));
  return chunks_[id];
}

const std::vector<ChunkId>& MemState::chunks_of(AppId app) const {
  static const std::vector<ChunkId> empty;
  auto it = app_chunks_.find(app);
  return it == app_chunks_.end() ? empty : it->second;
}

std::vector<AppId> MemState::apps() const {
  std::vector<AppId> out;
  for (const auto& [app, chunks] : app_chunks_)
    if (!chunks.empty()) out.push_back(app);
  return out;
}

Bytes MemState::app_footprint(AppId app) const {
  Bytes total = 0;
  for (ChunkId c : chunks_of(app)) total += chunks_[c].footprint();
  return total;
}

Bytes MemState::app_bytes_resident(AppId app, TierId tier) const {
  Bytes total = 0;
  for (ChunkId c : chunks_of(app))
    for (BlockId b : chunks_[c].blocks)
      if (blocks_[b].loc.is_resident() && blocks_[b].loc.tier == tier) total += kBlockBytes;
  return total;
}

Bytes MemState::app_bytes_not_resident(AppId app, TierId tier) const {
  return app_footprint(app) - app_bytes_resident(app, tier);
}

bool MemState::app_fully_resident(AppId app, TierId tier) const {
  return app_bytes_not_resident(app, tier) == 0;
}

Bytes MemState::pinned_physical() const {
  const TierState& p = tier(TierId::PinnedHost);
  return p.used + p.reserved + p.window_reserved;
}

Bytes MemState::internal_fragmentation() const {
  Bytes total = 0;
  for (const Chunk& c : chunks_)
    if (c.alive) total += c.footprint() - c.requested_size;
  return total;
}

Bytes MemState::total_accounted() const {
  Bytes total = 0;
  for (const TierState& t : tiers_) total += t.used;
  return total;
}

void MemState::clear_prefetch_flag(BlockId id) { block_mut(id).prefetched = false; }

void MemState::charge_pinned_resident(AppId app, std::int64_t delta) {
  pinned_global_ = static_cast<Bytes>(static_cast<std::int64_t>(pinned_global_) + delta);
  auto& v = pinned_by_app_[app];
  v = static_cast<Bytes>(static_cast<std::int64_t>(v) + delta);
}

void MemState::note_pinned_peak() {
  pinned_peak_ = std::max(pinned_peak_, pinned_physical());
}

void MemState::audit() const {
  Bytes used[kTierCount] = {0, 0, 0, 0};
  Bytes reserved[kTierCount] = {0, 0, 0, 0};
  std::map<AppId, Bytes> pinned_app;
  Bytes window_occupied = 0;

  for (const Block& b : blocks_) {
    if (!b.alive) continue;
    if (b.loc.is_resident()) {
      used[tier_depth(b.loc.tier)] += kBlockBytes;
      if (b.loc.tier == TierId::PinnedHost) pinned_app[b.app] += kBlockBytes;
    } else {
      // One-copy: an in-flight block occupies its source and reserves the dst.
      used[tier_depth(b.loc.tier)] += kBlockBytes;
      reserved[tier_depth(b.loc.dst)] += kBlockBytes;
    }
    if (b.in_window) window_occupied += kBlockBytes;
  }
  for (int i = 0; i < kTierCount; ++i) {
    const TierState& t = tiers_[i];
    if (t.used != used[i])
      throw InvariantViolation(std::string(tier_name(t.tier)) + " used counter drift");
    if (t.reserved != reserved[i])
      throw InvariantViolation(std::string(tier_name(t.tier)) + " reserved counter drift");
    if (!t.unbounded() && t.used + t.reserved + t.window_reserved > t.capacity)
      throw InvariantViolation(std::string(tier_name(t.tier)) + " over capacity");
  }
  Bytes pinned_global = 0;
  for (const auto& [app, bytes] : pinned_app) {
    pinned_global += bytes;
    auto it = pinned_by_app_.find(app);
    Bytes have = it == pinned_by_app_.end() ? 0 : it->second;
    if (have != bytes) throw InvariantViolation("per-app pinned counter drift");
  }
  for (const auto& [app, bytes] : pinned_by_app_) {
    if (bytes != 0 && pinned_app.find(app) == pinned_app.end())
      throw InvariantViolation("stale per-app pinned counter");
  }
  if (pinned_global != pinned_global_) throw InvariantViolation("global pinned counter drift");
  if (window_) {
    if (window_->occupied != window_occupied) throw InvariantViolation("window occupancy drift");
    if (window_->occupied > window_->size) throw InvariantViolation("window overfull");
  } else if (window_occupied != 0) {
    throw InvariantViolation("window occupants without a window");
  }
  for (const Chunk& c : chunks_) {
    if (!c.alive) continue;
    if (c.blocks.empty() || c.blocks.size() > kMaxBlocksPerChunk)
      throw InvariantViolation("chunk block count out of range");
    if (c.footprint() < c.requested_size) throw InvariantViolation("chunk footprint below request");
  }
}

}  // namespace nixie
