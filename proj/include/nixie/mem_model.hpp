#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nixie/errors.hpp"
#include "nixie/units.hpp"

namespace nixie {

// Four-tier hierarchy; depth order is fixed and transfers are adjacent-only.
enum class TierId : std::uint8_t { Gpu = 0, PinnedHost = 1, PagedHost = 2, Disk = 3 };

inline constexpr int kTierCount = 4;

constexpr int tier_depth(TierId t) { return static_cast<int>(t); }
constexpr TierId tier_at_depth(int d) { return static_cast<TierId>(d); }
constexpr bool tiers_adjacent(TierId a, TierId b) {
  int d = tier_depth(a) - tier_depth(b);
  return d == 1 || d == -1;
}

const char* tier_name(TierId t);
TierId parse_tier(const std::string& name);

struct TierState {
  TierId tier{TierId::Gpu};
  Bytes capacity = 0;
  Bytes used = 0;             // blocks resident here, incl. outbound in-flight sources
  Bytes reserved = 0;         // in-flight destination reservations
  Bytes window_reserved = 0;  // unoccupied remainder of the streaming window

  bool unbounded() const { return capacity == kUnbounded; }

  Bytes free_bytes() const {
    if (unbounded()) return kUnbounded;
    Bytes committed = used + reserved + window_reserved;
    if (committed > capacity) throw InvariantViolation("tier overcommitted: " + std::string(tier_name(tier)));
    return capacity - committed;
  }
};

struct Location {
  enum class Kind : std::uint8_t { Resident, InFlight };
  Kind kind = Kind::Resident;
  TierId tier = TierId::Gpu;  // Resident tier, or in-flight source
  TierId dst = TierId::Gpu;   // in-flight destination

  static Location resident(TierId t) { return {Kind::Resident, t, t}; }
  static Location in_flight(TierId src, TierId dst) { return {Kind::InFlight, src, dst}; }

  bool is_resident() const { return kind == Kind::Resident; }
};

struct Block {
  BlockId id = 0;
  ChunkId chunk = 0;
  AppId app = 0;
  Location loc;
  bool alive = true;
  bool in_window = false;   // occupies the streaming window in PinnedHost
  bool prefetched = false;  // placed by a prefetch plan, still unconsumed
};

struct Chunk {
  ChunkId id = 0;
  AppId app = 0;
  Bytes requested_size = 0;
  std::vector<BlockId> blocks;
  std::uint64_t logical_base = 0;  // stable address token, never reused
  bool alive = true;

  Bytes footprint() const { return blocks.size() * kBlockBytes; }
};

struct PinnedUsage {
  Bytes global = 0;
  std::map<AppId, Bytes> per_app;
};

// Streaming window bookkeeping (lives on PinnedHost).
struct StreamingWindow {
  TierId tier = TierId::PinnedHost;
  Bytes size = 0;
  Bytes occupied = 0;
  AppId owner = kNoApp;
};

// Placement state for every chunk and block plus per-tier accounting.
// Mutated only from the simulation loop; snapshots are plain copies.
class MemState {
 public:
  MemState();

  void set_capacity(TierId tier, Bytes capacity);
  const TierState& tier(TierId t) const { return tiers_[static_cast<int>(t)]; }

  std::vector<ChunkId> allocate(AppId app, Bytes size, TierId initial_tier);
  Bytes free_chunk(AppId app, ChunkId chunk);

  // Starts a single-hop move: reserves destination bytes. The source stays
  // charged until commit. use_window draws the reservation from the streaming
  // window instead of ordinary free space.
  void begin_move(BlockId block, TierId dst, bool use_window = false);
  void commit_move(BlockId block, TierId dst);

  PinnedUsage pinned_usage() const;

  void reserve_window(TierId tier, Bytes size, AppId owner);
  void release_window();
  const std::optional<StreamingWindow>& window() const { return window_; }

  // Lookups.
  bool has_chunk(ChunkId id) const;
  const Chunk& chunk(ChunkId id) const;
  const Block& block(BlockId id) const;
  const std::vector<ChunkId>& chunks_of(AppId app) const;
  std::vector<AppId> apps() const;

  Bytes app_footprint(AppId app) const;
  Bytes app_bytes_resident(AppId app, TierId tier) const;
  Bytes app_bytes_not_resident(AppId app, TierId tier) const;
  bool app_fully_resident(AppId app, TierId tier) const;

  Bytes pinned_physical() const;       // used + reserved + window_reserved
  Bytes pinned_physical_peak() const { return pinned_peak_; }
  Bytes internal_fragmentation() const;
  Bytes total_accounted() const;       // sum of used across tiers

  std::size_t block_count() const { return blocks_.size(); }
  void clear_prefetch_flag(BlockId block);

  // Full recomputation of all counters from block locations; throws
  // InvariantViolation on any mismatch. O(blocks), for checkpoints.
  void audit() const;

 private:
  TierState& tier_mut(TierId t) { return tiers_[static_cast<int>(t)]; }
  Block& block_mut(BlockId id);
  void charge_pinned_resident(AppId app, std::int64_t delta);
  void note_pinned_peak();

  TierState tiers_[kTierCount];
  std::vector<Block> blocks_;
  std::vector<Chunk> chunks_;
  std::map<AppId, std::vector<ChunkId>> app_chunks_;
  std::map<AppId, Bytes> pinned_by_app_;
  Bytes pinned_global_ = 0;
  Bytes pinned_peak_ = 0;
  std::uint64_t next_logical_base_ = 1;
  std::optional<StreamingWindow> window_;
};

}  // namespace nixie
