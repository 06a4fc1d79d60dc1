#include "nixie/transfer.hpp"

#include <algorithm>

namespace nixie {

ThroughputSample aggregate_throughput(const std::vector<TransferRecord>& log, Seconds t0, Seconds t1) {
  ThroughputSample s;
  if (t1 <= t0) return s;
  double to_gpu = 0, from_gpu = 0;
  for (const TransferRecord& r : log) {
    bool on_pcie = (r.src == TierId::Gpu && r.dst == TierId::PinnedHost) ||
                   (r.src == TierId::PinnedHost && r.dst == TierId::Gpu);
    if (!on_pcie || r.end <= r.start) continue;
    Seconds overlap = std::min(r.end, t1) - std::max(r.start, t0);
    if (overlap <= 0) continue;
    double contrib = static_cast<double>(r.bytes) * overlap / (r.end - r.start);
    if (r.dst == TierId::Gpu)
      to_gpu += contrib;
    else
      from_gpu += contrib;
  }
  Seconds span = t1 - t0;
  s.to_gpu = to_gpu / span;
  s.from_gpu = from_gpu / span;
  s.bidirectional = (to_gpu + from_gpu) / span;
  return s;
}

WindowHandle reserve_streaming_window(MemState& mem, TierId tier, Bytes size, AppId owner) {
  mem.reserve_window(tier, size, owner);
  return WindowHandle{tier, size, owner};
}

Orchestrator::Orchestrator(MemState& mem, const HardwareConfig& hw, EventQueue& queue,
                           std::vector<TransferRecord>* log)
    : mem_(mem), hw_(hw), queue_(queue), log_(log) {}

int Orchestrator::lane_index(TierId from, TierId to, int* link) const {
  int link_idx = std::min(tier_depth(from), tier_depth(to));
  if (link) *link = link_idx;
  if (hw_.links[link_idx].duplex == Duplex::HalfDuplex) return 2 * link_idx;
  bool up = tier_depth(to) < tier_depth(from);
  return 2 * link_idx + (up ? 0 : 1);
}

TierId Orchestrator::next_hop(const MoveState& ms) const {
  int at = tier_depth(ms.at);
  int target = tier_depth(ms.move.dst);
  return tier_at_depth(at + (target > at ? 1 : -1));
}

void Orchestrator::begin_plan(const MigrationPlan& plan, const PlannerConfig& cfg,
                              bool gate_evictions, AppId window_owner,
                              std::function<void(Seconds)> on_complete) {
  if (active()) throw SimError(Err::InvalidState, "orchestrator already executing a plan");
  moves_.clear();
  for (const Move& m : plan.moves) moves_.push_back(MoveState{m, m.src, false});
  moves_remaining_ = moves_.size();
  eviction_gate_open_ = !gate_evictions;
  on_complete_ = std::move(on_complete);
  window_owner_ = window_owner;
  window_size_ = cfg.streaming_window;
  window_wanted_ = false;
  for (const Move& m : plan.moves)
    if (m.kind == MoveKind::EvictFromGpu) window_wanted_ = window_size_ > 0;

  if (moves_remaining_ == 0) {
    // Empty plan: completes at the current instant, no events emitted.
    if (on_complete_) {
      auto cb = std::move(on_complete_);
      on_complete_ = nullptr;
      queue_.at(queue_.now(), [cb, t = queue_.now()] { cb(t); });
    }
    return;
  }
  try_reserve_window();
  for (std::size_t i = 0; i < moves_.size(); ++i) enqueue_leg(i);
  check_progress();
}

void Orchestrator::open_eviction_gate() {
  if (eviction_gate_open_) return;
  eviction_gate_open_ = true;
  pump_all();
  check_progress();
}

void Orchestrator::cancel_pending() {
  for (Lane& lane : lanes_) {
    for (const LegRef& ref : lane.queue) {
      MoveState& ms = moves_[ref.move_index];
      if (!ms.done) {
        ms.done = true;  // block stays wherever its last committed hop left it
        --moves_remaining_;
      }
    }
    lane.queue.clear();
  }
  if (moves_remaining_ == 0) {
    if (window_held_) {
      mem_.release_window();
      window_held_ = false;
    }
    if (on_complete_) {
      auto cb = std::move(on_complete_);
      on_complete_ = nullptr;
      queue_.at(queue_.now(), [cb, t = queue_.now()] { cb(t); });
    }
  }
}

bool Orchestrator::quiesced() const { return legs_on_link_ == 0; }

void Orchestrator::enqueue_leg(std::size_t mi) {
  MoveState& ms = moves_[mi];
  int lane = lane_index(ms.at, next_hop(ms), nullptr);
  lanes_[lane].queue.push_back(LegRef{mi});
  pump(lane);
}

void Orchestrator::pump_all() {
  for (int lane = 0; lane < 2 * kLinkCount; ++lane) pump(lane);
}

bool Orchestrator::leg_gated(const MoveState& ms) const {
  // Evictions leave the GPU only after the incumbent's kernels have drained.
  return ms.move.kind == MoveKind::EvictFromGpu && ms.at == TierId::Gpu && !eviction_gate_open_;
}

bool Orchestrator::leg_startable(const MoveState& ms, TierId hop, bool* use_window) const {
  *use_window = false;
  if (leg_gated(ms)) return false;
  const TierState& dst = mem_.tier(hop);
  if (dst.unbounded() || dst.free_bytes() >= kBlockBytes) return true;
  const Block& blk = mem_.block(ms.move.block);
  if (hop == TierId::PinnedHost && ms.move.kind == MoveKind::EvictFromGpu && window_held_ &&
      mem_.window() && mem_.window()->owner == blk.app && dst.window_reserved >= kBlockBytes) {
    *use_window = true;
    return true;
  }
  return false;
}

void Orchestrator::pump(int lane) {
  Lane& l = lanes_[lane];
  while (!l.busy && !l.queue.empty()) {
    // FIFO per direction: scan for the first startable leg, but never start a
    // leg whose direction has an earlier stalled leg. On half-duplex lanes
    // this lets eviction traffic pass a fetch stalled on destination space.
    bool started = false;
    bool dir_blocked[2] = {false, false};
    for (auto it = l.queue.begin(); it != l.queue.end(); ++it) {
      MoveState& ms = moves_[it->move_index];
      TierId hop = next_hop(ms);
      int dir = tier_depth(hop) < tier_depth(ms.at) ? 0 : 1;
      if (dir_blocked[dir]) continue;
      bool use_window = false;
      if (!leg_startable(ms, hop, &use_window)) {
        dir_blocked[dir] = true;
        continue;
      }
      std::size_t mi = it->move_index;
      l.queue.erase(it);
      start_leg(lane, mi, hop, use_window);
      started = true;
      break;
    }
    if (!started) break;
  }
}

void Orchestrator::start_leg(int lane, std::size_t mi, TierId hop, bool use_window) {
  MoveState& ms = moves_[mi];
  mem_.begin_move(ms.move.block, hop, use_window);
  lanes_[lane].busy = true;
  ++legs_on_link_;

  int link = 0;
  (void)lane_index(ms.at, hop, &link);
  bool up = tier_depth(hop) < tier_depth(ms.at);
  Bandwidth bw = up ? hw_.links[link].up_bw : hw_.links[link].down_bw;
  Seconds occupancy = static_cast<Seconds>(kBlockBytes) / bw;
  Seconds started = queue_.now();
  queue_.after(occupancy, [this, lane, mi, started] { on_occupancy_end(lane, mi, started); });
}

void Orchestrator::on_occupancy_end(int lane, std::size_t mi, Seconds started) {
  MoveState& ms = moves_[mi];
  TierId hop = next_hop(ms);
  if (log_) log_->push_back(TransferRecord{started, queue_.now(), ms.move.block, ms.at, hop, kBlockBytes});
  lanes_[lane].busy = false;
  pump(lane);
  queue_.after(hw_.dispatch_overhead, [this, mi, hop] { on_commit(mi, hop); });
}

void Orchestrator::on_commit(std::size_t mi, TierId hop) {
  MoveState& ms = moves_[mi];
  mem_.commit_move(ms.move.block, hop);
  ms.at = hop;
  --legs_on_link_;

  if (ms.at == ms.move.dst) {
    ms.done = true;
    --moves_remaining_;
  } else {
    enqueue_leg(mi);
  }
  try_reserve_window();
  pump_all();

  if (moves_remaining_ == 0) {
    if (window_held_) {
      mem_.release_window();
      window_held_ = false;
    }
    if (on_complete_) {
      auto cb = std::move(on_complete_);
      on_complete_ = nullptr;
      queue_.at(queue_.now(), [cb, t = queue_.now()] { cb(t); });
    }
    return;
  }
  check_progress();
}

void Orchestrator::try_reserve_window() {
  if (!window_wanted_ || window_held_) return;
  const TierState& pinned = mem_.tier(TierId::PinnedHost);
  if (!pinned.unbounded() && pinned.free_bytes() < window_size_) return;
  mem_.reserve_window(TierId::PinnedHost, window_size_, window_owner_);
  window_held_ = true;
}

void Orchestrator::check_progress() const {
  if (moves_remaining_ == 0 || legs_on_link_ > 0) return;
  // Nothing on any link: the plan can only proceed if some leg is merely
  // waiting on the eviction gate. Anything else is a real deadlock.
  bool any_pending = false, any_gated = false;
  for (const Lane& lane : lanes_) {
    for (const LegRef& ref : lane.queue) {
      any_pending = true;
      if (leg_gated(moves_[ref.move_index])) any_gated = true;
    }
  }
  if (any_pending && !any_gated)
    throw InvariantViolation("transfer deadlock: stalled legs with idle links");
}

ExecResult execute(const MigrationPlan& plan, MemState& mem, const HardwareConfig& hw,
                   const PlannerConfig& cfg, Seconds start) {
  ExecResult result;
  EventQueue queue;
  Orchestrator orch(mem, hw, queue, &result.events);
  AppId owner = kNoApp;
  for (const Move& m : plan.moves)
    if (m.kind == MoveKind::EvictFromGpu) {
      owner = mem.block(m.block).app;
      break;
    }
  bool done = false;
  queue.at(start, [&] {
    orch.begin_plan(plan, cfg, /*gate_evictions=*/false, owner, [&](Seconds t) {
      result.completion = t;
      done = true;
    });
  });
  queue.run_all();
  if (!done) throw InvariantViolation("plan did not complete");
  return result;
}

}  // namespace nixie
