#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nixie/errors.hpp"
#include "nixie/units.hpp"

namespace nixie {

struct MlfqConfig {
  int levels = 4;                   // K queues, level 1 is highest priority
  Seconds base_allotment = 8.0;     // T[1]; doubles per level
  Seconds base_preemption = 4.0;    // S[1]; doubles per level
  Seconds idle_threshold = 0.1;
  Seconds tick = 0.01;

  Seconds allotment(int level) const;   // T[level]
  Seconds preemption(int level) const;  // S[level]
  void validate() const;
};

struct PendingFactor {
  double value = 0.5;  // R
  int population = 1;  // N, apps at the level
};

enum class PriorityDecision : std::uint8_t { Unchanged, Demote, Promote };

const char* decision_name(PriorityDecision d);

// Inputs to one priority-inference evaluation, all in seconds.
struct PrioritySnapshot {
  int level = 1;
  Seconds exec_at_level = 0;       // accumulated execution at the current level
  Seconds idle_for = 0;            // since last execution / API activity
  Seconds since_level_change = 0;  // since the last priority update
  Seconds pending_for = 0;         // since the most recent pending request, 0 if none
  bool idle = false;
};

// The priority-inference rule: demote on allotment exhaustion; otherwise, for
// an idle app past the jitter gate, promote when idleness net of discounted
// pending time exceeds the next level's allotment plus accumulated execution.
PriorityDecision decide_priority(const PrioritySnapshot& s, const MlfqConfig& cfg,
                                 const PendingFactor& r);

struct SchedLogRow {
  Seconds time = 0;
  AppId app = 0;
  std::string event;
  int level = 1;
  Seconds exec_at_level = 0;
  Seconds idle_for = 0;
  Seconds since_level_change = 0;
  Seconds pending_for = 0;
};

enum class ApiEventKind : std::uint8_t { NonBlockingReturn, BlockingEnter, BlockingExit };

// Per-application MLFQ state: level, execution accounting, idleness
// detection, queueing, and the promotion/demotion machinery.
class MlfqScheduler {
 public:
  explicit MlfqScheduler(MlfqConfig cfg);

  const MlfqConfig& config() const { return cfg_; }

  void register_app(AppId app, Seconds now);
  bool registered(AppId app) const { return state_.count(app) > 0; }

  void on_api_event(AppId app, Seconds now, ApiEventKind kind);
  bool is_idle(AppId app, Seconds now) const;

  // Applies Algorithm-1 style inference and mutates level/bookkeeping.
  PriorityDecision infer_priority(AppId app, Seconds now);
  void infer_all(Seconds now);

  // Queue management (pending = parked waiting for the grant).
  void enqueue_request(AppId app, Seconds now);
  void clear_request(AppId app);
  bool has_request(AppId app) const;
  std::optional<AppId> select_next(Seconds now) const;
  std::optional<AppId> next_prefetch_candidate(Seconds now) const;

  bool should_preempt(AppId running, Seconds now) const;

  PendingFactor pending_factor(int level) const;

  // Grant lifecycle, driven by the engine.
  void on_grant_start(AppId app, Seconds now);
  void on_grant_end(AppId app, Seconds now);
  void add_execution(AppId app, Seconds busy);

  int level_of(AppId app) const;
  Seconds exec_at_level(AppId app) const;
  std::optional<AppId> granted() const { return granted_; }
  Seconds grant_started() const { return grant_started_; }

  // Least-recently-scheduled first; apps that never ran come first by id.
  std::vector<AppId> victim_hint() const;

  // Test seam: force a level without touching other bookkeeping.
  void force_level(AppId app, int level, Seconds now);

  const std::vector<SchedLogRow>& log() const { return log_; }
  void set_logging(bool on) { logging_ = on; }

 private:
  struct AppState {
    int level = 1;
    Seconds exec_at_level = 0;
    Seconds last_api_return = 0;
    Seconds last_level_change = 0;
    Seconds last_grant_end = 0;
    std::optional<Seconds> enqueued_at;
    bool in_blocking_call = false;
    bool ever_granted = false;
  };

  const AppState& state(AppId app) const;
  AppState& state_mut(AppId app);
  PrioritySnapshot snapshot(AppId app, Seconds now) const;
  void log_row(Seconds now, AppId app, const char* event);

  MlfqConfig cfg_;
  std::map<AppId, AppState> state_;
  std::optional<AppId> granted_;
  Seconds grant_started_ = 0;
  std::vector<SchedLogRow> log_;
  bool logging_ = false;
};

}  // namespace nixie
