#pragma once

// Long-term model maintenance for one area. Registrations against the active
// model are verified; repeated failures trigger scoring of every model on the
// start of the session, and the best one is activated or a new model is built.
// Models that go unused for longer than a time-to-live are dropped.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vloc/compression.hpp"
#include "vloc/error.hpp"
#include "vloc/matching.hpp"
#include "vloc/model.hpp"
#include "vloc/pose_estimation.hpp"
#include "vloc/scene_synth.hpp"

namespace vloc {

struct VerifyThresholds {
  // Registrations need more than t1 correspondences.
  std::size_t t1 = 50;
  // ... and an inlier ratio above t2.
  double t2 = 0.5;
};

inline bool Verify(std::size_t num_correspondences, std::size_t num_inliers,
                   const VerifyThresholds& th = {}) {
  if (num_correspondences <= th.t1 || num_correspondences == 0) return false;
  // N_I / N_c > T2 without division.
  return static_cast<double>(num_inliers) >
         th.t2 * static_cast<double>(num_correspondences);
}

inline bool Verify(const LocalizationResult& result, const VerifyThresholds& th = {}) {
  return result.registered() &&
         Verify(result.num_correspondences, result.num_inliers, th);
}

struct LocalizationParams {
  MatchParams match;
  RansacParams ransac;
  LocalizeOptions options;
};

struct ModelRecord {
  std::uint64_t id = 0;
  std::shared_ptr<const PointCloudModel> model;
  std::shared_ptr<const MatchIndex> index;
  std::optional<CompressedModel> compression;
  double created = 0.0;
  double last_used = 0.0;
  std::string condition;
};

struct PoolParams {
  VerifyThresholds verify;
  // Score needed to activate an existing model.
  double swap_threshold = 0.6;
  // At least `invalid_quota` failed verifications among the last
  // `invalid_window` views trigger swapping.
  int invalid_window = 5;
  int invalid_quota = 3;
  // Views from the start of the session used for scoring.
  int score_views = 10;
  double ttl_seconds = 30.0 * 86400.0;

  void Validate() const {
    Require(verify.t2 > 0.0 && verify.t2 <= 1.0, ErrorCode::kInvalidArgument,
            "T2 must be in (0, 1]");
    Require(swap_threshold >= 0.0 && swap_threshold <= 1.0,
            ErrorCode::kInvalidArgument, "swap threshold must be in [0, 1]");
    Require(invalid_window >= 1 && invalid_quota >= 1 &&
                invalid_quota <= invalid_window,
            ErrorCode::kInvalidArgument, "need 1 <= Q <= V");
    Require(score_views >= 1, ErrorCode::kInvalidArgument, "n must be >= 1");
    Require(ttl_seconds > 0.0, ErrorCode::kInvalidArgument, "TTL must be > 0");
  }
};

struct SessionBatch {
  std::uint64_t session_id = 0;
  std::vector<QueryView> views;
  std::vector<double> timestamps;

  void Validate() const {
    Require(!views.empty(), ErrorCode::kInvalidArgument, "session has no views");
    Require(timestamps.size() == views.size(), ErrorCode::kInvalidArgument,
            "one timestamp per view required");
    Require(std::is_sorted(timestamps.begin(), timestamps.end()),
            ErrorCode::kInvalidArgument, "timestamps must be non-decreasing");
  }
};

enum class PoolEvent : std::uint8_t {
  kTrigger,
  kScore,
  kActivate,
  kDeactivate,
  kConstruct,
  kPrune,
  kNoSwap,
};

constexpr std::string_view ToString(PoolEvent e) {
  switch (e) {
    case PoolEvent::kTrigger: return "trigger";
    case PoolEvent::kScore: return "score";
    case PoolEvent::kActivate: return "activate";
    case PoolEvent::kDeactivate: return "deactivate";
    case PoolEvent::kConstruct: return "construct";
    case PoolEvent::kPrune: return "prune";
    case PoolEvent::kNoSwap: return "no_swap";
  }
  return "?";
}

struct PoolDecision {
  std::uint64_t session_id = 0;
  // View index within the session at which the decision was taken.
  std::size_t view = 0;
  PoolEvent event = PoolEvent::kTrigger;
  std::uint64_t model_id = 0;
  double score = 0.0;
  double time = 0.0;
};

class ModelPool {
 public:
  ModelPool() = default;
  explicit ModelPool(PoolParams params) : params_(params) { params_.Validate(); }

  const PoolParams& params() const { return params_; }
  const std::vector<ModelRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::optional<std::uint64_t> active_id() const { return active_; }

  // The first record added becomes active.
  void Add(ModelRecord record) {
    Require(record.model && record.index, ErrorCode::kInvalidArgument,
            "record needs a model and an index");
    Require(record.created <= record.last_used, ErrorCode::kInvalidArgument,
            "created must be <= last_used");
    Require(Find(record.id) == nullptr, ErrorCode::kInvalidArgument,
            "duplicate model id");
    records_.push_back(std::move(record));
    if (!active_) active_ = records_.back().id;
  }

  const ModelRecord* Find(std::uint64_t id) const {
    for (const auto& r : records_) {
      if (r.id == id) return &r;
    }
    return nullptr;
  }
  ModelRecord* Find(std::uint64_t id) {
    for (auto& r : records_) {
      if (r.id == id) return &r;
    }
    return nullptr;
  }

  const ModelRecord& Active() const {
    Require(active_.has_value(), ErrorCode::kPoolEmpty, "model pool is empty");
    return *Find(*active_);
  }
  ModelRecord& Active() {
    Require(active_.has_value(), ErrorCode::kPoolEmpty, "model pool is empty");
    return *Find(*active_);
  }

  void SetActive(std::uint64_t id) {
    Require(Find(id) != nullptr, ErrorCode::kInvalidArgument, "unknown model id");
    active_ = id;
  }

  std::uint64_t NextId() const {
    std::uint64_t m = 0;
    for (const auto& r : records_) m = std::max(m, r.id);
    return m + 1;
  }

  // Removes non-active records with now - last_used > ttl.
  std::vector<std::uint64_t> Prune(double now, double ttl) {
    Require(ttl > 0.0, ErrorCode::kInvalidArgument, "TTL must be > 0");
    std::vector<std::uint64_t> removed;
    std::erase_if(records_, [&](const ModelRecord& r) {
      const bool stale = r.id != active_ && now - r.last_used > ttl;
      if (stale) removed.push_back(r.id);
      return stale;
    });
    return removed;
  }
  std::vector<std::uint64_t> Prune(double now) { return Prune(now, params_.ttl_seconds); }

  bool IsValid() const {
    if (records_.empty()) return !active_;
    return active_ && Find(*active_) != nullptr;
  }

 private:
  PoolParams params_;
  std::vector<ModelRecord> records_;
  std::optional<std::uint64_t> active_;
};

// Fraction of the first n views that verify against the record.
inline double ScoreModel(const ModelRecord& record, std::span<const QueryView> views,
                         const LocalizationParams& loc, const VerifyThresholds& th,
                         int n = 10) {
  Require(n >= 1, ErrorCode::kInvalidArgument, "n must be >= 1");
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(n), views.size());
  if (m == 0) return 0.0;
  std::size_t pass = 0;
  for (std::size_t v = 0; v < m; ++v) {
    if (Verify(Localize(views[v], *record.index, loc.match, loc.ransac, loc.options), th)) {
      ++pass;
    }
  }
  return static_cast<double>(pass) / static_cast<double>(m);
}

// Builds a model from session data when no pooled model fits. Receives the
// id the new record must carry.
using ModelBuilder =
    std::function<ModelRecord(const SessionBatch& session, std::uint64_t new_id)>;

struct ViewOutcome {
  std::uint64_t model_id = 0;
  LocalizationResult result;
  bool verified = false;
};

struct IngestReport {
  std::vector<PoolDecision> decisions;
  std::vector<ViewOutcome> views;
  bool triggered = false;
  bool constructed = false;
  std::vector<std::uint64_t> pruned;
};

// Runs one session through the pool. At most one swap is evaluated per
// session; after a swap the remaining views are served by the new model.
inline IngestReport IngestSession(ModelPool& pool, const SessionBatch& session,
                                  const LocalizationParams& loc,
                                  const ModelBuilder& builder = {}) {
  Require(!pool.empty(), ErrorCode::kPoolEmpty, "model pool is empty");
  session.Validate();
  const PoolParams& pp = pool.params();
  IngestReport report;
  auto log = [&](std::size_t view, PoolEvent ev, std::uint64_t id, double score = 0.0) {
    report.decisions.push_back(
        {session.session_id, view, ev, id, score, session.timestamps[view]});
  };

  std::deque<bool> window;
  int failures = 0;
  for (std::size_t v = 0; v < session.views.size(); ++v) {
    const ModelRecord& active = pool.Active();
    ViewOutcome out;
    out.model_id = active.id;
    out.result = Localize(session.views[v], *active.index, loc.match, loc.ransac, loc.options);
    out.verified = Verify(out.result, pp.verify);
    report.views.push_back(std::move(out));
    if (report.triggered) continue;

    window.push_back(!report.views.back().verified);
    failures += window.back() ? 1 : 0;
    if (static_cast<int>(window.size()) > pp.invalid_window) {
      failures -= window.front() ? 1 : 0;
      window.pop_front();
    }
    if (failures < pp.invalid_quota) continue;

    report.triggered = true;
    log(v, PoolEvent::kTrigger, active.id);
    const std::uint64_t previous = active.id;
    std::optional<std::uint64_t> best;
    double best_score = -1.0;
    double best_used = 0.0;
    for (const auto& rec : pool.records()) {
      const double s = ScoreModel(rec, session.views, loc, pp.verify, pp.score_views);
      log(v, PoolEvent::kScore, rec.id, s);
      if (!best || s > best_score || (s == best_score && rec.last_used > best_used)) {
        best = rec.id;
        best_score = s;
        best_used = rec.last_used;
      }
    }
    std::optional<std::uint64_t> next;
    if (best_score >= pp.swap_threshold) {
      next = best;
    } else if (builder) {
      ModelRecord rec = builder(session, pool.NextId());
      const std::uint64_t id = rec.id;
      pool.Add(std::move(rec));
      report.constructed = true;
      log(v, PoolEvent::kConstruct, id);
      next = id;
    }
    if (!next || *next == previous) {
      log(v, PoolEvent::kNoSwap, previous, best_score);
      continue;
    }
    log(v, PoolEvent::kDeactivate, previous);
    pool.SetActive(*next);
    log(v, PoolEvent::kActivate, *next, best_score);
  }

  const double end = session.timestamps.back();
  pool.Active().last_used = std::max(pool.Active().last_used, end);
  report.pruned = pool.Prune(end);
  for (auto id : report.pruned) log(session.views.size() - 1, PoolEvent::kPrune, id);
  return report;
}

}  // namespace vloc
