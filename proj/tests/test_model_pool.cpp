#include <gtest/gtest.h>

#include "vloc/benchmark.hpp"
#include "vloc/model_pool.hpp"

namespace vloc {
namespace {

TEST(Verify, TruthTable) {
  const VerifyThresholds th;
  EXPECT_TRUE(Verify(60, 36, th));
  EXPECT_FALSE(Verify(50, 50, th));
  EXPECT_FALSE(Verify(100, 50, th));
  EXPECT_TRUE(Verify(51, 26, th));
  EXPECT_FALSE(Verify(51, 25, th));
  EXPECT_FALSE(Verify(0, 0, VerifyThresholds{0, 0.5}));
}

TEST(Verify, MonotoneInInliers) {
  const VerifyThresholds th;
  for (std::size_t nc = 0; nc < 200; ++nc) {
    bool seen_true = false;
    for (std::size_t ni = 0; ni <= nc; ++ni) {
      const bool v = Verify(nc, ni, th);
      if (seen_true) {
        EXPECT_TRUE(v);
      }
      seen_true = seen_true || v;
      EXPECT_EQ(v, nc > 50 && 2 * ni > nc);
    }
  }
}

TEST(Verify, FailedRegistrationNeverVerifies) {
  LocalizationResult r;
  r.num_correspondences = 500;
  r.num_inliers = 500;
  EXPECT_TRUE(Verify(r));
  r.failure = RegistrationFailure{FailureStage::kPoseEstimation, "x"};
  EXPECT_FALSE(Verify(r));
}

SessionSimConfig SmallConfig() {
  SessionSimConfig c;
  c.scene.plane_point_counts = {900, 600, 400};
  c.scene.line_point_counts = {150};
  c.scene.num_clutter = 250;
  c.scene.num_cameras = 15;
  c.views_per_session = 12;
  return c;
}

const RegimeWorld& World() {
  static const RegimeWorld world(SmallConfig(), 3);
  return world;
}

ModelPool SeededPool(PoolParams params = {}) {
  ModelPool pool(params);
  pool.Add(World().Build(0, 1, 0.0));
  pool.Add(World().Build(1, 2, 0.0));
  return pool;
}

std::size_t Count(const IngestReport& r, PoolEvent e) {
  std::size_t n = 0;
  for (const auto& d : r.decisions) n += d.event == e ? 1 : 0;
  return n;
}

TEST(ScoreModel, OwnRegimeScoresHigher) {
  const auto a = World().Build(0, 1, 0.0);
  const auto b = World().Build(1, 2, 0.0);
  const auto session = World().Session(0, 0, 100.0);
  const LocalizationParams loc;
  const double sa = ScoreModel(a, session.views, loc, {}, 10);
  const double sb = ScoreModel(b, session.views, loc, {}, 10);
  EXPECT_DOUBLE_EQ(sa, 1.0);
  EXPECT_DOUBLE_EQ(sb, 0.0);
  EXPECT_GT(sa, sb);
  EXPECT_THROW(ScoreModel(a, session.views, loc, {}, 0), Error);
}

TEST(IngestSession, MatchingRegimeDoesNotTrigger) {
  ModelPool pool = SeededPool();
  const auto report = IngestSession(pool, World().Session(0, 0, 86400.0), LocalizationParams{});
  EXPECT_FALSE(report.triggered);
  EXPECT_EQ(Count(report, PoolEvent::kTrigger), 0u);
  EXPECT_EQ(*pool.active_id(), 1u);
  EXPECT_EQ(pool.Active().last_used, 86400.0 + 11.0);
  for (const auto& v : report.views) EXPECT_TRUE(v.verified);
}

TEST(IngestSession, SwapsToMatchingRecord) {
  ModelPool pool = SeededPool();
  const auto report = IngestSession(pool, World().Session(1, 1, 86400.0), LocalizationParams{});
  EXPECT_TRUE(report.triggered);
  EXPECT_FALSE(report.constructed);
  EXPECT_EQ(*pool.active_id(), 2u);
  EXPECT_EQ(Count(report, PoolEvent::kScore), 2u);
  EXPECT_EQ(Count(report, PoolEvent::kActivate), 1u);
  // Trigger fires on the third failure of the window.
  EXPECT_EQ(report.decisions.front().event, PoolEvent::kTrigger);
  EXPECT_EQ(report.decisions.front().view, 2u);
  // Views after the swap are served by the new model and verify.
  for (std::size_t v = 3; v < report.views.size(); ++v) {
    EXPECT_EQ(report.views[v].model_id, 2u);
    EXPECT_TRUE(report.views[v].verified);
  }
}

TEST(IngestSession, ConstructsForNovelRegime) {
  ModelPool pool = SeededPool();
  int built = 0;
  const ModelBuilder builder = [&](const SessionBatch&, std::uint64_t id) {
    ++built;
    return World().Build(2, id, 86400.0);
  };
  const auto report = IngestSession(pool, World().Session(2, 2, 86400.0), LocalizationParams{}, builder);
  EXPECT_TRUE(report.constructed);
  EXPECT_EQ(built, 1);
  EXPECT_EQ(pool.size(), 3u);
  EXPECT_EQ(*pool.active_id(), 3u);
  EXPECT_EQ(Count(report, PoolEvent::kConstruct), 1u);
}

TEST(IngestSession, NoBuilderKeepsActive) {
  ModelPool pool = SeededPool();
  const auto report = IngestSession(pool, World().Session(2, 2, 86400.0), LocalizationParams{});
  EXPECT_TRUE(report.triggered);
  EXPECT_EQ(*pool.active_id(), 1u);
  EXPECT_EQ(Count(report, PoolEvent::kNoSwap), 1u);
  EXPECT_EQ(pool.size(), 2u);
}

TEST(IngestSession, TiesGoToMostRecentlyUsed) {
  ModelPool pool;
  pool.Add(World().Build(0, 1, 0.0));
  auto older = World().Build(1, 2, 0.0);
  auto newer = World().Build(1, 3, 0.0);
  newer.last_used = 50.0;
  pool.Add(std::move(older));
  pool.Add(std::move(newer));
  IngestSession(pool, World().Session(1, 1, 100.0), LocalizationParams{});
  EXPECT_EQ(*pool.active_id(), 3u);
}

TEST(IngestSession, PrunesStaleRecords) {
  PoolParams params;
  params.ttl_seconds = 1000.0;
  ModelPool pool = SeededPool(params);
  const auto report = IngestSession(pool, World().Session(0, 0, 5000.0), LocalizationParams{});
  EXPECT_EQ(report.pruned, (std::vector<std::uint64_t>{2}));
  EXPECT_EQ(Count(report, PoolEvent::kPrune), 1u);
  EXPECT_EQ(pool.size(), 1u);
  EXPECT_TRUE(pool.IsValid());
}

TEST(IngestSession, EmptyPool) {
  ModelPool pool;
  try {
    IngestSession(pool, World().Session(0, 0, 0.0), LocalizationParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPoolEmpty);
  }
}

ModelRecord StubRecord(std::uint64_t id, double created, double used) {
  ModelRecord r;
  r.id = id;
  r.model = std::make_shared<PointCloudModel>();
  r.index = std::make_shared<MatchIndex>();
  r.created = created;
  r.last_used = used;
  return r;
}

TEST(ModelPool, FirstAddedIsActive) {
  ModelPool pool;
  EXPECT_TRUE(pool.IsValid());
  pool.Add(StubRecord(4, 0, 1));
  pool.Add(StubRecord(9, 0, 1));
  EXPECT_EQ(*pool.active_id(), 4u);
  EXPECT_EQ(pool.NextId(), 10u);
  EXPECT_THROW(pool.Add(StubRecord(4, 0, 1)), Error);
  EXPECT_THROW(pool.Add(StubRecord(5, 2, 1)), Error);
  EXPECT_THROW(pool.SetActive(77), Error);
}

TEST(ModelPool, Prune) {
  ModelPool pool;
  pool.Add(StubRecord(1, 0, 0));
  pool.Add(StubRecord(2, 0, 10));
  pool.Add(StubRecord(3, 0, 90));
  // Active record is immune even when stale.
  EXPECT_EQ(pool.Prune(100.0, 50.0), (std::vector<std::uint64_t>{2}));
  EXPECT_EQ(pool.size(), 2u);
  // Strictly greater than TTL.
  EXPECT_TRUE(pool.Prune(140.0, 50.0).empty());
  EXPECT_EQ(pool.Prune(140.1, 50.0), (std::vector<std::uint64_t>{3}));
  EXPECT_THROW(pool.Prune(0.0, 0.0), Error);
  EXPECT_TRUE(pool.IsValid());
}

TEST(PoolParams, Validation) {
  PoolParams p;
  p.invalid_quota = 6;
  EXPECT_THROW(p.Validate(), Error);
  p = PoolParams{};
  p.verify.t2 = 0.0;
  EXPECT_THROW(p.Validate(), Error);
  p = PoolParams{};
  p.ttl_seconds = 0.0;
  EXPECT_THROW(ModelPool{p}, Error);
}

}  // namespace
}  // namespace vloc
