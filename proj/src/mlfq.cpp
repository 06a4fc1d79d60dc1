#include "nixie/mlfq.hpp"

#include <algorithm>

namespace nixie {

Seconds MlfqConfig::allotment(int level) const {
  Seconds t = base_allotment;
  for (int i = 1; i < level; ++i) t *= 2;
  return t;
}

Seconds MlfqConfig::preemption(int level) const {
  Seconds s = base_preemption;
  for (int i = 1; i < level; ++i) s *= 2;
  return s;
}

void MlfqConfig::validate() const {
  if (levels < 1) throw SimError(Err::ValidationError, "mlfq.levels must be >= 1");
  if (base_allotment <= 0 || base_preemption <= 0)
    throw SimError(Err::ValidationError, "mlfq allotment/preemption must be positive");
  if (base_preemption >= base_allotment)
    throw SimError(Err::ValidationError, "mlfq preemption threshold must be below the allotment");
  if (idle_threshold <= 0 || tick <= 0)
    throw SimError(Err::ValidationError, "mlfq idle_threshold and tick must be positive");
}

const char* decision_name(PriorityDecision d) {
  switch (d) {
    case PriorityDecision::Unchanged: return "unchanged";
    case PriorityDecision::Demote: return "demote";
    case PriorityDecision::Promote: return "promote";
  }
  return "?";
}

PriorityDecision decide_priority(const PrioritySnapshot& s, const MlfqConfig& cfg,
                                 const PendingFactor& r) {
  if (s.exec_at_level > cfg.allotment(s.level)) return PriorityDecision::Demote;
  if (!s.idle) return PriorityDecision::Unchanged;
  if (s.since_level_change <= cfg.allotment(s.level)) return PriorityDecision::Unchanged;
  if (s.level < 2) return PriorityDecision::Unchanged;
  if (s.idle_for - r.value * s.pending_for > cfg.allotment(s.level - 1) + s.exec_at_level)
    return PriorityDecision::Promote;
  return PriorityDecision::Unchanged;
}

MlfqScheduler::MlfqScheduler(MlfqConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void MlfqScheduler::register_app(AppId app, Seconds now) {
  AppState s;
  s.last_api_return = now;
  s.last_level_change = now;
  s.last_grant_end = now;
  state_[app] = s;
}

const MlfqScheduler::AppState& MlfqScheduler::state(AppId app) const {
  auto it = state_.find(app);
  if (it == state_.end()) throw SimError(Err::UnknownApp, "app " + std::to_string(app));
  return it->second;
}

MlfqScheduler::AppState& MlfqScheduler::state_mut(AppId app) {
  auto it = state_.find(app);
  if (it == state_.end()) throw SimError(Err::UnknownApp, "app " + std::to_string(app));
  return it->second;
}

void MlfqScheduler::on_api_event(AppId app, Seconds now, ApiEventKind kind) {
  AppState& s = state_mut(app);
  switch (kind) {
    case ApiEventKind::NonBlockingReturn:
      s.last_api_return = now;
      break;
    case ApiEventKind::BlockingEnter:
      s.in_blocking_call = true;
      break;
    case ApiEventKind::BlockingExit:
      s.in_blocking_call = false;
      s.last_api_return = now;
      break;
  }
}

bool MlfqScheduler::is_idle(AppId app, Seconds now) const {
  const AppState& s = state(app);
  return !s.in_blocking_call && now - s.last_api_return > cfg_.idle_threshold;
}

PrioritySnapshot MlfqScheduler::snapshot(AppId app, Seconds now) const {
  const AppState& s = state(app);
  PrioritySnapshot snap;
  snap.level = s.level;
  snap.exec_at_level = s.exec_at_level;
  snap.idle = is_idle(app, now);
  snap.idle_for = now - std::max(s.last_grant_end, s.last_api_return);
  snap.since_level_change = now - s.last_level_change;
  snap.pending_for = s.enqueued_at ? now - *s.enqueued_at : 0.0;
  return snap;
}

PriorityDecision MlfqScheduler::infer_priority(AppId app, Seconds now) {
  AppState& s = state_mut(app);
  PrioritySnapshot snap = snapshot(app, now);
  PriorityDecision d = decide_priority(snap, cfg_, pending_factor(s.level));
  if (d == PriorityDecision::Demote) {
    int next = std::min(s.level + 1, cfg_.levels);
    s.exec_at_level = 0;
    if (next != s.level) {
      s.level = next;
      s.last_level_change = now;
    }
    log_row(now, app, "demote");
  } else if (d == PriorityDecision::Promote) {
    s.level -= 1;
    s.exec_at_level = 0;
    s.last_level_change = now;
    log_row(now, app, "promote");
  }
  return d;
}

void MlfqScheduler::infer_all(Seconds now) {
  for (auto& [app, s] : state_) {
    (void)s;
    infer_priority(app, now);
  }
}

void MlfqScheduler::enqueue_request(AppId app, Seconds now) {
  AppState& s = state_mut(app);
  if (!s.enqueued_at) {
    s.enqueued_at = now;
    log_row(now, app, "enqueue");
  }
}

void MlfqScheduler::clear_request(AppId app) { state_mut(app).enqueued_at.reset(); }

bool MlfqScheduler::has_request(AppId app) const { return state(app).enqueued_at.has_value(); }

std::optional<AppId> MlfqScheduler::select_next(Seconds now) const {
  (void)now;
  std::optional<AppId> best;
  for (const auto& [app, s] : state_) {
    if (!s.enqueued_at) continue;
    if (granted_ && *granted_ == app) continue;
    if (!best) {
      best = app;
      continue;
    }
    const AppState& b = state_.at(*best);
    if (s.level < b.level ||
        (s.level == b.level && *s.enqueued_at < *b.enqueued_at) ||
        (s.level == b.level && *s.enqueued_at == *b.enqueued_at && app < *best)) {
      best = app;
    }
  }
  return best;
}

std::optional<AppId> MlfqScheduler::next_prefetch_candidate(Seconds now) const {
  return select_next(now);
}

bool MlfqScheduler::should_preempt(AppId running, Seconds now) const {
  const AppState& r = state(running);
  if (now - grant_started_ < cfg_.preemption(r.level)) return false;
  for (const auto& [app, s] : state_) {
    if (app == running || !s.enqueued_at) continue;
    if (s.level <= r.level) return true;
  }
  return false;
}

PendingFactor MlfqScheduler::pending_factor(int level) const {
  int n = 0;
  for (const auto& [app, s] : state_) {
    (void)app;
    if (s.level == level) ++n;
  }
  if (n < 1) n = 1;
  return PendingFactor{1.0 / (2.0 * n), n};
}

void MlfqScheduler::on_grant_start(AppId app, Seconds now) {
  AppState& s = state_mut(app);
  granted_ = app;
  grant_started_ = now;
  s.ever_granted = true;
  log_row(now, app, "grant");
}

void MlfqScheduler::on_grant_end(AppId app, Seconds now) {
  AppState& s = state_mut(app);
  s.last_grant_end = now;
  if (granted_ && *granted_ == app) granted_.reset();
  log_row(now, app, "yield");
}

void MlfqScheduler::add_execution(AppId app, Seconds busy) {
  state_mut(app).exec_at_level += busy;
}

int MlfqScheduler::level_of(AppId app) const { return state(app).level; }

Seconds MlfqScheduler::exec_at_level(AppId app) const { return state(app).exec_at_level; }

std::vector<AppId> MlfqScheduler::victim_hint() const {
  std::vector<AppId> apps;
  for (const auto& [app, s] : state_) {
    (void)s;
    apps.push_back(app);
  }
  std::sort(apps.begin(), apps.end(), [this](AppId a, AppId b) {
    const AppState& sa = state_.at(a);
    const AppState& sb = state_.at(b);
    if (sa.ever_granted != sb.ever_granted) return !sa.ever_granted;  // never-ran first
    if (sa.last_grant_end != sb.last_grant_end) return sa.last_grant_end < sb.last_grant_end;
    return a < b;
  });
  return apps;
}

void MlfqScheduler::force_level(AppId app, int level, Seconds now) {
  AppState& s = state_mut(app);
  s.level = level;
  s.exec_at_level = 0;
  s.last_level_change = now;
}

void MlfqScheduler::log_row(Seconds now, AppId app, const char* event) {
  if (!logging_) return;
  PrioritySnapshot snap = snapshot(app, now);
  log_.push_back(SchedLogRow{now, app, event, snap.level, snap.exec_at_level, snap.idle_for,
                             snap.since_level_change, snap.pending_for});
}

}  // namespace nixie
