#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "nixie/event_queue.hpp"
#include "nixie/mem_model.hpp"
#include "nixie/planner.hpp"

namespace nixie {

enum class Duplex : std::uint8_t { FullDuplex, HalfDuplex };

struct LinkConfig {
  Bandwidth up_bw = 0;    // toward the shallower tier (GPU side)
  Bandwidth down_bw = 0;  // toward the deeper tier
  Duplex duplex = Duplex::FullDuplex;
};

inline constexpr int kLinkCount = 3;  // gpu-pinned, pinned-paged, paged-disk

struct HardwareConfig {
  Bytes tier_capacity[kTierCount] = {32 * kGiB, 64 * kGiB, 96 * kGiB, kUnbounded};
  LinkConfig links[kLinkCount] = {
      {64.0 * kGiB, 64.0 * kGiB, Duplex::FullDuplex},
      {32.0 * kGiB, 32.0 * kGiB, Duplex::FullDuplex},
      {4.0 * kGiB, 4.0 * kGiB, Duplex::FullDuplex},
  };
  Seconds dispatch_overhead = 5e-6;  // per-block dispatch latency, pipelined
  Seconds ipc_latency = 50e-6;       // one daemon<->shim message

  void apply_to(MemState& mem) const {
    for (int i = 0; i < kTierCount; ++i) mem.set_capacity(tier_at_depth(i), tier_capacity[i]);
  }
};

// One physical single-hop transfer: [start, end] is the link occupancy window.
struct TransferRecord {
  Seconds start = 0;
  Seconds end = 0;
  BlockId block = 0;
  TierId src = TierId::Gpu;
  TierId dst = TierId::Gpu;
  Bytes bytes = kBlockBytes;
};

struct ThroughputSample {
  Bandwidth to_gpu = 0;
  Bandwidth from_gpu = 0;
  Bandwidth bidirectional = 0;
};

// Measured over the GPU<->pinned link from the transfer log.
ThroughputSample aggregate_throughput(const std::vector<TransferRecord>& log, Seconds t0, Seconds t1);

struct WindowHandle {
  TierId tier = TierId::PinnedHost;
  Bytes size = 0;
  AppId owner = kNoApp;
};

WindowHandle reserve_streaming_window(MemState& mem, TierId tier, Bytes size, AppId owner);

// Executes migration plans over the modeled links. One block per link
// direction at a time, FIFO; eviction legs may draw on the streaming window
// once ordinary pinned capacity is exhausted. Event-driven: the orchestrator
// advances via the shared EventQueue.
class Orchestrator {
 public:
  Orchestrator(MemState& mem, const HardwareConfig& hw, EventQueue& queue,
               std::vector<TransferRecord>* log = nullptr);

  // gate_evictions=true holds EvictFromGpu legs until open_eviction_gate()
  // (kernel drain). window_owner is the evicting application whose blocks may
  // drain through the streaming window. Completion fires (as an event) once
  // every move has committed.
  void begin_plan(const MigrationPlan& plan, const PlannerConfig& cfg, bool gate_evictions,
                  AppId window_owner, std::function<void(Seconds)> on_complete);

  void open_eviction_gate();
  // Drops queued legs that have not begun a physical hop (prefetch preemption).
  void cancel_pending();

  bool active() const { return moves_remaining_ > 0; }
  bool quiesced() const;  // no leg physically on a link

 private:
  struct MoveState {
    Move move;
    TierId at;  // current tier while between hops
    bool done = false;
  };
  struct LegRef {
    std::size_t move_index;
  };
  struct Lane {
    bool busy = false;
    std::deque<LegRef> queue;
  };

  int lane_index(TierId from, TierId to, int* link) const;
  void enqueue_leg(std::size_t mi);
  void pump(int lane);
  void pump_all();
  bool leg_gated(const MoveState& ms) const;
  bool leg_startable(const MoveState& ms, TierId hop, bool* use_window) const;
  void start_leg(int lane, std::size_t mi, TierId hop, bool use_window);
  void on_occupancy_end(int lane, std::size_t mi, Seconds started);
  void on_commit(std::size_t mi, TierId hop_dst);
  void try_reserve_window();
  void check_progress() const;
  TierId next_hop(const MoveState& ms) const;

  MemState& mem_;
  HardwareConfig hw_;
  EventQueue& queue_;
  std::vector<TransferRecord>* log_;

  std::vector<MoveState> moves_;
  // Lane layout: 2*link (up), 2*link+1 (down); half-duplex links share lane 2*link.
  Lane lanes_[2 * kLinkCount];
  std::size_t moves_remaining_ = 0;
  bool eviction_gate_open_ = true;
  bool window_wanted_ = false;
  bool window_held_ = false;
  Bytes window_size_ = 0;
  AppId window_owner_ = kNoApp;
  int legs_on_link_ = 0;
  std::function<void(Seconds)> on_complete_;
};

struct ExecResult {
  Seconds completion = 0;
  std::vector<TransferRecord> events;
};

// Convenience wrapper: runs one plan to completion on a private event loop.
ExecResult execute(const MigrationPlan& plan, MemState& mem, const HardwareConfig& hw,
                   const PlannerConfig& cfg, Seconds start = 0);

}  // namespace nixie
