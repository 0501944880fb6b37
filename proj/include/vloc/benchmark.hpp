#pragma once

// Seeded experiments: single-image positioning error per compression method
// at matched point counts, and long-term sessions under appearance regimes
// driving the model pool.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vloc/compression.hpp"
#include "vloc/error.hpp"
#include "vloc/matching.hpp"
#include "vloc/model_pool.hpp"
#include "vloc/pose_estimation.hpp"
#include "vloc/scene_synth.hpp"
#include "vloc/serialization.hpp"
#include "vloc/structure_detect.hpp"

namespace vloc {

struct ErrorStats {
  double mean = 0.0;
  double stdev = 0.0;
  std::size_t count = 0;
};

// Population standard deviation; empty input gives NaN mean.
inline ErrorStats Summarize(std::span<const double> values) {
  ErrorStats s;
  s.count = values.size();
  if (values.empty()) {
    s.mean = s.stdev = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stdev = std::sqrt(ss / values.size());
  return s;
}

struct BenchConfig {
  SceneSpec scene;
  std::vector<CompressionMethod> methods = {
      CompressionMethod::kNone, CompressionMethod::kWeightedKCover,
      CompressionMethod::kSetKCover, CompressionMethod::kTopVisibility};
  // Retained points as a fraction of the full model, targeted by the
  // weighted k-cover; the other methods are matched to its count.
  double target_fraction = 0.05;
  double count_tolerance = 0.05;
  int num_queries = 50;
  double reconstruction_noise = 0.01;
  RenderParams query_render{1.0, 0.03, 0.2, 0.3};
  // 0 picks the default for the model size.
  int num_words = 0;
  MatchParams match;
  RansacParams ransac;
  LocalizeOptions localize;
  DetectParams detect;

  void Validate() const {
    scene.Validate();
    Require(!methods.empty(), ErrorCode::kConfigInvalid, "no methods");
    Require(target_fraction > 0.0 && target_fraction <= 1.0, ErrorCode::kConfigInvalid,
            "target_fraction must be in (0, 1]");
    Require(count_tolerance >= 0.0, ErrorCode::kConfigInvalid,
            "count_tolerance must be >= 0");
    Require(num_queries >= 1, ErrorCode::kConfigInvalid, "num_queries must be >= 1");
    Require(reconstruction_noise >= 0.0, ErrorCode::kConfigInvalid,
            "reconstruction_noise must be >= 0");
    Require(num_words >= 0, ErrorCode::kConfigInvalid, "num_words must be >= 0");
    try {
      match.Validate();
      ransac.Validate();
    } catch (const Error& e) {
      Fail(ErrorCode::kConfigInvalid, e.what());
    }
  }
};

struct MethodRow {
  CompressionMethod method = CompressionMethod::kNone;
  // k or kept fraction.
  double parameter = 0.0;
  // The greedy selection was cut to the matched count.
  bool truncated = false;
  std::size_t num_points = 0;
  std::uint64_t size_bytes = 0;
  double mean_cm = 0.0;
  double stdev_cm = 0.0;
  double registration_rate = 0.0;
  double wall_seconds = 0.0;
  // Registered views only, in view order.
  std::vector<double> errors_cm;
  std::vector<std::size_t> registered_views;
};

struct BenchReport {
  std::uint64_t seed = 0;
  std::size_t model_points = 0;
  std::size_t num_queries = 0;
  std::vector<MethodRow> rows;

  const MethodRow* Find(CompressionMethod m) const {
    for (const auto& r : rows) {
      if (r.method == m) return &r;
    }
    return nullptr;
  }
};

namespace bench_detail {

inline constexpr std::uint64_t kQueryStream = 0x5155455259ULL;

struct Candidate {
  CompressedModel compressed;
  bool truncated = false;
};

// Greedy runs for integer k, memoized.
class KSearch {
 public:
  KSearch(std::function<CompressedModel(int)> run, int k_max)
      : run_(std::move(run)), k_max_(std::max(k_max, 1)) {}

  const CompressedModel& At(int k) {
    auto it = cache_.find(k);
    if (it == cache_.end()) it = cache_.emplace(k, run_(k)).first;
    return it->second;
  }
  std::size_t Count(int k) { return At(k).selected_ids.size(); }

  // Smallest k whose count reaches target (k_max if none does).
  int SmallestReaching(std::size_t target) {
    int lo = 1, hi = k_max_;
    if (Count(hi) < target) return hi;
    while (lo < hi) {
      const int mid = lo + (hi - lo) / 2;
      if (Count(mid) >= target) hi = mid; else lo = mid + 1;
    }
    return lo;
  }

  // k with count closest to target (ties to smaller k).
  int Closest(std::size_t target) {
    const int k = SmallestReaching(target);
    if (k > 1) {
      const auto above = static_cast<double>(Count(k)) - static_cast<double>(target);
      const auto below = static_cast<double>(target) - static_cast<double>(Count(k - 1));
      if (below <= std::abs(above)) return k - 1;
    }
    return k;
  }

 private:
  std::function<CompressedModel(int)> run_;
  int k_max_;
  std::map<int, CompressedModel> cache_;
};

inline bool WithinTolerance(std::size_t count, std::size_t target, double tol) {
  return std::abs(static_cast<double>(count) - static_cast<double>(target)) <=
         tol * static_cast<double>(target);
}

inline Candidate MatchCount(KSearch& search, std::size_t target, double tol,
                            const VisibilityMatrix& vis) {
  const int k = search.Closest(target);
  Candidate c{search.At(k), false};
  if (WithinTolerance(c.compressed.selected_ids.size(), target, tol)) return c;
  // Integer k is too coarse: cut the greedy order of the next larger cover.
  c.compressed = search.At(search.SmallestReaching(target));
  if (c.compressed.selected_ids.size() > target) {
    c.compressed.selected_ids.resize(target);
    c.compressed.camera_counts = CameraCounts(vis, c.compressed.selected_ids);
    c.truncated = true;
  }
  return c;
}

inline CompressedModel MatchTopVisibility(const PointCloudModel& model,
                                          const StructureLabeling& labeling,
                                          std::size_t target) {
  double lo = 0.0, hi = 1.0;
  CompressedModel best = CompressTopVisibility(model, labeling, hi);
  auto dist = [&](const CompressedModel& c) {
    return std::abs(static_cast<double>(c.selected_ids.size()) -
                    static_cast<double>(target));
  };
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    auto c = CompressTopVisibility(model, labeling, mid);
    if (dist(c) < dist(best)) best = c;
    if (c.selected_ids.size() >= target) hi = mid; else lo = mid;
  }
  return best;
}

inline int MaxPointsPerCamera(const VisibilityMatrix& vis) {
  std::size_t m = 1;
  for (CameraId j = 0; j < vis.num_cameras(); ++j) m = std::max(m, vis.PointsOf(j).size());
  return static_cast<int>(m);
}

}  // namespace bench_detail

// Held-out query views from random viewpoints on the camera arc.
inline std::vector<QueryView> RenderQueries(const GroundTruthScene& scene, int count,
                                            const RenderParams& render,
                                            std::uint64_t seed) {
  std::vector<QueryView> out;
  Rng rng = MakeRng(seed, bench_detail::kQueryStream);
  std::uint64_t attempt = 0;
  while (static_cast<int>(out.size()) < count) {
    Require(attempt < 100ULL * count + 100, ErrorCode::kInfeasibleSpec,
            "cannot place query views");
    const CameraView view = SampleArcViewpoint(scene.spec, rng);
    try {
      out.push_back(RenderView(scene, view, render,
                               DeriveSeed(seed, bench_detail::kQueryStream, attempt)));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTooFewVisible) throw;
    }
    ++attempt;
  }
  return out;
}

inline double PositionErrorCm(const LocalizationResult& r, const QueryView& q) {
  return 100.0 * (r.Center() - q.true_pose.Center()).norm();
}

struct MethodModels {
  CompressedModel compressed;
  bool truncated = false;
};

// Compressed selections for every configured method, counts matched to the
// weighted k-cover.
inline std::vector<MethodModels> CompressForBenchmark(const PointCloudModel& model,
                                                      const StructureLabeling& labeling,
                                                      const BenchConfig& config) {
  using namespace bench_detail;
  const std::size_t n = model.num_points();
  const auto target = static_cast<std::size_t>(
      std::max<double>(6.0, std::llround(config.target_fraction * n)));
  const int k_max = MaxPointsPerCamera(model.visibility);
  KSearch weighted([&](int k) { return CompressWeightedKCover(model, labeling, k); },
                   k_max);
  KSearch unweighted([&](int k) { return CompressSetKCover(model, k); }, k_max);

  const auto& w = weighted.At(weighted.Closest(target));
  const std::size_t matched = w.selected_ids.size();
  std::vector<MethodModels> out;
  for (auto m : config.methods) {
    MethodModels mm;
    switch (m) {
      case CompressionMethod::kNone: {
        mm.compressed.method = m;
        mm.compressed.source_model_id = model.model_id;
        mm.compressed.selected_ids.resize(n);
        std::iota(mm.compressed.selected_ids.begin(), mm.compressed.selected_ids.end(), 0);
        mm.compressed.camera_counts = CameraCounts(model.visibility, mm.compressed.selected_ids);
        mm.compressed.parameter = 1.0;
        break;
      }
      case CompressionMethod::kWeightedKCover:
        mm.compressed = w;
        break;
      case CompressionMethod::kSetKCover: {
        auto c = MatchCount(unweighted, matched, config.count_tolerance, model.visibility);
        mm.compressed = std::move(c.compressed);
        mm.truncated = c.truncated;
        break;
      }
      case CompressionMethod::kTopVisibility:
        mm.compressed = MatchTopVisibility(model, labeling, matched);
        break;
    }
    out.push_back(std::move(mm));
  }
  return out;
}

inline MethodRow EvaluateMethod(const PointCloudModel& model, const MethodModels& mm,
                                std::span<const QueryView> queries,
                                const BenchConfig& config, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  MethodRow row;
  row.method = mm.compressed.method;
  row.parameter = mm.compressed.parameter;
  row.truncated = mm.truncated;
  const PointCloudModel sub = Materialize(model, mm.compressed);
  row.num_points = sub.num_points();
  row.size_bytes = EncodeModel(ModelFile{sub, std::nullopt, mm.compressed}).size();
  const int words =
      config.num_words > 0 ? config.num_words : DefaultWordCount(sub.num_points());
  const MatchIndex index =
      BuildIndex(sub, std::min<int>(words, static_cast<int>(sub.num_descriptors())),
                 DeriveSeed(seed, 41));
  for (std::size_t v = 0; v < queries.size(); ++v) {
    RansacParams rp = config.ransac;
    rp.seed = DeriveSeed(seed, 43, v);
    const auto r = Localize(queries[v], index, config.match, rp, config.localize);
    if (!r.registered()) continue;
    row.errors_cm.push_back(PositionErrorCm(r, queries[v]));
    row.registered_views.push_back(v);
  }
  const auto stats = Summarize(row.errors_cm);
  row.mean_cm = stats.mean;
  row.stdev_cm = stats.stdev;
  row.registration_rate =
      queries.empty() ? 0.0 : static_cast<double>(stats.count) / queries.size();
  row.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

inline BenchReport RunBenchmark(const BenchConfig& config, std::uint64_t seed) {
  config.Validate();
  SceneSpec spec = config.scene;
  spec.seed = seed;
  const GroundTruthScene scene = GenerateScene(spec);
  const PointCloudModel model = BuildModel(scene, config.reconstruction_noise, seed);
  DetectParams dp = config.detect;
  dp.seed = DeriveSeed(seed, 47);
  const StructureLabeling labeling = DetectStructures(model.positions, dp);
  const auto queries = RenderQueries(scene, config.num_queries, config.query_render, seed);

  BenchReport report;
  report.seed = seed;
  report.model_points = model.num_points();
  report.num_queries = queries.size();
  for (const auto& mm : CompressForBenchmark(model, labeling, config)) {
    report.rows.push_back(EvaluateMethod(model, mm, queries, config, seed));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Session simulation.

struct SessionSimConfig {
  SceneSpec scene;
  // Regime index of every session, in time order. Regime 0 is the appearance
  // at model-building time; the others are appearance shifts of it.
  std::vector<int> schedule = {0, 1, 1, 0, 2, 2};
  int num_regimes = 3;
  // Regimes 0 .. seeded_regimes-1 have a model in the initial pool.
  int seeded_regimes = 2;
  int views_per_session = 20;
  double session_interval = 86400.0;
  double view_interval = 1.0;
  AppearanceShift shift{1, 0.95, 1.0};
  CompressionMethod method = CompressionMethod::kWeightedKCover;
  double target_fraction = 0.1;
  double reconstruction_noise = 0.01;
  RenderParams query_render{1.0, 0.03, 0.2, 0.3};
  PoolParams pool;
  LocalizationParams localization;
  DetectParams detect;

  void Validate() const {
    scene.Validate();
    Require(num_regimes >= 1 && seeded_regimes >= 1 && seeded_regimes <= num_regimes,
            ErrorCode::kConfigInvalid, "need 1 <= seeded_regimes <= num_regimes");
    Require(!schedule.empty(), ErrorCode::kConfigInvalid, "empty schedule");
    for (int r : schedule) {
      Require(r >= 0 && r < num_regimes, ErrorCode::kConfigInvalid,
              "schedule references unknown regime");
    }
    Require(views_per_session >= 1, ErrorCode::kConfigInvalid,
            "views_per_session must be >= 1");
    Require(session_interval > 0.0 && view_interval > 0.0, ErrorCode::kConfigInvalid,
            "intervals must be positive");
    Require(target_fraction > 0.0 && target_fraction <= 1.0, ErrorCode::kConfigInvalid,
            "target_fraction must be in (0, 1]");
    try {
      pool.Validate();
      localization.match.Validate();
      localization.ransac.Validate();
    } catch (const Error& e) {
      Fail(ErrorCode::kConfigInvalid, e.what());
    }
  }
};

struct SessionRow {
  std::uint64_t session_id = 0;
  int regime = 0;
  std::uint64_t active_before = 0;
  std::uint64_t active_after = 0;
  bool triggered = false;
  bool constructed = false;
  ErrorStats fixed;
  double fixed_registration = 0.0;
  ErrorStats updated;
  double updated_registration = 0.0;
};

struct SessionSimReport {
  std::uint64_t seed = 0;
  std::vector<SessionRow> sessions;
  std::vector<PoolDecision> decisions;
  // Model id planted for each regime (0 when never built).
  std::vector<std::uint64_t> regime_model;
  std::size_t constructions = 0;
  std::size_t final_pool_size = 0;
  // Over registered views of sessions whose regime differs from regime 0.
  ErrorStats fixed_shifted;
  ErrorStats updated_shifted;
};

class RegimeWorld {
 public:
  RegimeWorld(const SessionSimConfig& config, std::uint64_t seed)
      : config_(config), seed_(seed) {
    SceneSpec spec = config.scene;
    spec.seed = seed;
    scenes_.push_back(GenerateScene(spec));
    for (int r = 1; r < config.num_regimes; ++r) {
      AppearanceShift s = config.shift;
      s.seed = DeriveSeed(seed, 53, static_cast<std::uint64_t>(r));
      scenes_.push_back(ApplyAppearanceShift(scenes_.front(), s));
    }
  }

  const GroundTruthScene& scene(int regime) const { return scenes_.at(regime); }

  // Reconstruction of a regime, compressed and indexed.
  ModelRecord Build(int regime, std::uint64_t id, double time) const {
    const std::uint64_t s = DeriveSeed(seed_, 59, static_cast<std::uint64_t>(regime));
    const PointCloudModel full = BuildModel(scene(regime), config_.reconstruction_noise, s);
    CompressedModel c;
    if (config_.method == CompressionMethod::kNone) {
      c.method = CompressionMethod::kNone;
      c.selected_ids.resize(full.num_points());
      std::iota(c.selected_ids.begin(), c.selected_ids.end(), 0);
    } else {
      BenchConfig bc;
      bc.target_fraction = config_.target_fraction;
      bc.methods = {config_.method};
      DetectParams dp = config_.detect;
      dp.seed = DeriveSeed(s, 47);
      const auto labeling = DetectStructures(full.positions, dp);
      c = CompressForBenchmark(full, labeling, bc).front().compressed;
    }
    auto model = std::make_shared<PointCloudModel>(Materialize(full, c));
    ModelRecord rec;
    rec.id = id;
    rec.index = std::make_shared<MatchIndex>(
        BuildIndex(*model, DefaultWordCount(model->num_points()), DeriveSeed(s, 41)));
    rec.model = std::move(model);
    rec.compression = std::move(c);
    rec.created = rec.last_used = time;
    rec.condition = "regime " + std::to_string(regime);
    return rec;
  }

  SessionBatch Session(std::size_t index, int regime, double start) const {
    SessionBatch b;
    b.session_id = index + 1;
    const std::uint64_t s = DeriveSeed(seed_, 61, index);
    b.views = RenderQueries(scene(regime), config_.views_per_session, config_.query_render, s);
    for (int v = 0; v < config_.views_per_session; ++v) {
      b.timestamps.push_back(start + v * config_.view_interval);
    }
    return b;
  }

 private:
  SessionSimConfig config_;
  std::uint64_t seed_;
  std::vector<GroundTruthScene> scenes_;
};

inline SessionSimReport RunSessionSim(const SessionSimConfig& config, std::uint64_t seed) {
  config.Validate();
  const RegimeWorld world(config, seed);
  SessionSimReport report;
  report.seed = seed;
  report.regime_model.assign(config.num_regimes, 0);

  ModelPool pool(config.pool);
  for (int r = 0; r < config.seeded_regimes; ++r) {
    const std::uint64_t id = static_cast<std::uint64_t>(r) + 1;
    pool.Add(world.Build(r, id, 0.0));
    report.regime_model[r] = id;
  }
  const ModelRecord fixed = pool.Active();

  std::vector<double> fixed_shifted, updated_shifted;
  for (std::size_t s = 0; s < config.schedule.size(); ++s) {
    const int regime = config.schedule[s];
    const double start = (static_cast<double>(s) + 1.0) * config.session_interval;
    const SessionBatch batch = world.Session(s, regime, start);

    SessionRow row;
    row.session_id = batch.session_id;
    row.regime = regime;
    row.active_before = *pool.active_id();
    const ModelBuilder builder = [&](const SessionBatch&, std::uint64_t id) {
      auto rec = world.Build(regime, id, start);
      report.regime_model[regime] = id;
      return rec;
    };
    const IngestReport ing = IngestSession(pool, batch, config.localization, builder);
    row.active_after = *pool.active_id();
    row.triggered = ing.triggered;
    row.constructed = ing.constructed;
    report.constructions += ing.constructed ? 1 : 0;
    report.decisions.insert(report.decisions.end(), ing.decisions.begin(),
                            ing.decisions.end());

    // The update-applied path localizes with whichever model the pool
    // selected for the session; the fixed path always uses the first model.
    std::vector<double> fixed_err, updated_err;
    const ModelRecord& served = pool.Active();
    for (std::size_t v = 0; v < batch.views.size(); ++v) {
      RansacParams rp = config.localization.ransac;
      rp.seed = DeriveSeed(seed, 67, s * 100000 + v);
      const auto& q = batch.views[v];
      const auto rf = Localize(q, *fixed.index, config.localization.match, rp,
                               config.localization.options);
      if (rf.registered()) fixed_err.push_back(PositionErrorCm(rf, q));
      const auto ru = Localize(q, *served.index, config.localization.match, rp,
                               config.localization.options);
      if (ru.registered()) updated_err.push_back(PositionErrorCm(ru, q));
    }
    row.fixed = Summarize(fixed_err);
    row.fixed_registration = static_cast<double>(fixed_err.size()) / batch.views.size();
    row.updated = Summarize(updated_err);
    row.updated_registration = static_cast<double>(updated_err.size()) / batch.views.size();
    if (regime != 0) {
      fixed_shifted.insert(fixed_shifted.end(), fixed_err.begin(), fixed_err.end());
      updated_shifted.insert(updated_shifted.end(), updated_err.begin(), updated_err.end());
    }
    report.sessions.push_back(row);
  }
  report.fixed_shifted = Summarize(fixed_shifted);
  report.updated_shifted = Summarize(updated_shifted);
  report.final_pool_size = pool.size();
  return report;
}

}  // namespace vloc
