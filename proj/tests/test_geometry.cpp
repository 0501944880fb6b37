#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vloc/geometry.hpp"

namespace vloc {
namespace {

using testing::RandomRotation;
using testing::RandomVector;

CameraIntrinsics UnitIntrinsics() {
  CameraIntrinsics k;
  k.focal_x = k.focal_y = 1.0;
  k.principal_x = k.principal_y = 0.0;
  return k;
}

// Intersects the ray center->p with the plane one unit in front of the
// camera, then reads the hit point in camera axes.
Pixel LineIntersectionOracle(const CameraPose& pose, const CameraIntrinsics& k,
                             const Point3D& p) {
  const Eigen::Matrix3d& r = pose.rotation();
  const Point3D c = -r.transpose() * pose.translation();
  const Eigen::Vector3d axis = r.row(2).transpose();
  const Point3D plane_point = c + axis;
  const Eigen::Vector3d d = p - c;
  const double s = (plane_point - c).dot(axis) / d.dot(axis);
  const Point3D hit = c + s * d;
  const double x = (hit - c).dot(r.row(0).transpose());
  const double y = (hit - c).dot(r.row(1).transpose());
  return {k.focal_x * x + k.skew * y + k.principal_x, k.focal_y * y + k.principal_y};
}

TEST(Project, OpticalAxis) {
  const Pixel px = Project(CameraPose(), UnitIntrinsics(), Point3D(0, 0, 1));
  EXPECT_EQ(px, Pixel(0, 0));
}

TEST(Project, SimilarTriangles) {
  const Pixel px = Project(CameraPose(), UnitIntrinsics(), Point3D(1, 1, 2));
  EXPECT_DOUBLE_EQ(px.x(), 0.5);
  EXPECT_DOUBLE_EQ(px.y(), 0.5);
}

TEST(Project, MatchesLineIntersectionOracle) {
  Rng rng = MakeRng(11);
  const CameraIntrinsics k = testing::StandardIntrinsics();
  int checked = 0;
  for (int t = 0; t < 500; ++t) {
    const CameraPose pose(RandomRotation(rng), RandomVector(rng, -5, 5));
    const Point3D p = RandomVector(rng, -10, 10);
    const auto px = TryProject(pose, k, p);
    if (!px || pose.ToCamera(p).z() < 0.1) continue;
    const Pixel oracle = LineIntersectionOracle(pose, k, p);
    EXPECT_LT((*px - oracle).norm(), 1e-10 * std::max(1.0, oracle.norm()));
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(Project, BehindCamera) {
  EXPECT_FALSE(TryProject(CameraPose(), UnitIntrinsics(), Point3D(0, 0, -1)));
  EXPECT_FALSE(TryProject(CameraPose(), UnitIntrinsics(), Point3D(1, 0, 1e-13)));
  try {
    Project(CameraPose(), UnitIntrinsics(), Point3D(0, 0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBehindCamera);
  }
}

TEST(Project, UnprojectRoundTrip) {
  Rng rng = MakeRng(12);
  const CameraIntrinsics k = testing::StandardIntrinsics();
  for (int t = 0; t < 200; ++t) {
    const CameraPose pose(RandomRotation(rng), RandomVector(rng, -5, 5));
    const Pixel u(Uniform(rng, 0, 900), Uniform(rng, 0, 600));
    const double depth = Uniform(rng, 0.5, 50);
    const Point3D p = Unproject(pose, k, u, depth);
    EXPECT_LT((Project(pose, k, p) - u).norm(), 1e-9);
  }
}

TEST(ReprojectionError, Basics) {
  const CameraIntrinsics k = UnitIntrinsics();
  EXPECT_EQ(ReprojectionError(CameraPose(), k, Point3D(1, 1, 2), Pixel(0.5, 0.5)), 0.0);
  EXPECT_DOUBLE_EQ(ReprojectionError(CameraPose(), k, Point3D(0, 0, 1), Pixel(3, 4)), 5.0);
}

TEST(ReprojectionError, RandomMatchesRecompute) {
  Rng rng = MakeRng(13);
  const CameraIntrinsics k = testing::StandardIntrinsics();
  for (int t = 0; t < 200; ++t) {
    const CameraPose pose = testing::RandomLookAtPose(rng, 20);
    const Point3D p = RandomVector(rng, -3, 3);
    const Pixel obs(Uniform(rng, 0, 900), Uniform(rng, 0, 600));
    const double e = ReprojectionError(pose, k, p, obs);
    EXPECT_GE(e, 0.0);
    EXPECT_NEAR(e, (Project(pose, k, p) - obs).norm(), 1e-12);
  }
}

TEST(CameraCenter, Examples) {
  EXPECT_EQ(CameraCenter(CameraPose()), Point3D(0, 0, 0));
  EXPECT_EQ(CameraCenter(CameraPose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(1, 2, 3))),
            Point3D(-1, -2, -3));
  Rng rng = MakeRng(14);
  for (int t = 0; t < 100; ++t) {
    const CameraPose pose(RandomRotation(rng), RandomVector(rng, -10, 10));
    const Point3D c = CameraCenter(pose);
    EXPECT_LT((pose.rotation() * c + pose.translation()).norm(), 1e-12);
  }
}

TEST(CameraPose, RejectsNonRotation) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 1) = 1e-6;
  EXPECT_THROW(CameraPose(m, Eigen::Vector3d::Zero()), Error);
  EXPECT_THROW(CameraPose(-Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero()), Error);
  EXPECT_THROW(CameraPose(Eigen::Matrix3d::Identity(),
                          Eigen::Vector3d(std::numeric_limits<double>::quiet_NaN(), 0, 0)),
               Error);
}

TEST(CameraPose, LookAtPointsAtTarget) {
  const CameraPose pose = CameraPose::LookAt(Point3D(0, -10, 2), Point3D(1, 0, 0),
                                             Eigen::Vector3d::UnitZ());
  const Point3D cam = pose.ToCamera(Point3D(1, 0, 0));
  EXPECT_NEAR(cam.x(), 0.0, 1e-12);
  EXPECT_NEAR(cam.y(), 0.0, 1e-12);
  EXPECT_GT(cam.z(), 0.0);
  // World up maps to image up (negative y).
  EXPECT_LT(pose.ToCamera(Point3D(1, 0, 1)).y(), 0.0);
  EXPECT_LT((pose.Center() - Point3D(0, -10, 2)).norm(), 1e-12);
}

struct SmallProblem {
  std::vector<CameraView> views;
  std::vector<Point3D> points;
  VisibilityMatrix vis;
  ObservationTable obs;
};

SmallProblem MakeProblem(std::uint64_t seed, double noise) {
  Rng rng = MakeRng(seed);
  Gaussian g;
  SmallProblem p;
  for (int j = 0; j < 3; ++j) {
    p.views.push_back({testing::RandomLookAtPose(rng, 15), testing::StandardIntrinsics()});
  }
  std::vector<std::vector<CameraId>> lists;
  for (int i = 0; i < 5; ++i) {
    p.points.push_back(RandomVector(rng, -2, 2));
    lists.push_back(i % 2 == 0 ? std::vector<CameraId>{0, 1, 2} : std::vector<CameraId>{0, 2});
  }
  p.vis = VisibilityMatrix::FromPointLists(3, lists);
  for (PointId i = 0; i < 5; ++i) {
    for (CameraId j : p.vis.CamerasOf(i)) {
      p.obs.Set(i, j,
                Project(p.views[j].pose, p.views[j].intrinsics, p.points[i]) +
                    noise * Pixel(g(rng), g(rng)));
    }
  }
  return p;
}

TEST(SfmObjective, NoiseFreeIsZero) {
  const auto p = MakeProblem(21, 0.0);
  EXPECT_NEAR(SfmObjective(p.views, p.points, p.vis, p.obs), 0.0, 1e-9);
}

TEST(SfmObjective, SingleOffset) {
  std::vector<CameraView> views{{CameraPose(), UnitIntrinsics()}};
  std::vector<Point3D> points{Point3D(0, 0, 1)};
  const auto vis = VisibilityMatrix::FromPointLists(1, {{0}});
  ObservationTable obs;
  obs.Set(0, 0, Pixel(3, 4));
  EXPECT_DOUBLE_EQ(SfmObjective(views, points, vis, obs), 5.0);
  EXPECT_DOUBLE_EQ(SfmObjective(views, points, vis, obs, DistanceKind::kSquared), 25.0);
}

TEST(SfmObjective, MatchesPerTermOracle) {
  const auto p = MakeProblem(22, 2.0);
  double oracle = 0.0;
  for (PointId i = 0; i < p.points.size(); ++i) {
    for (CameraId j = 0; j < p.views.size(); ++j) {
      if (!p.vis.Visible(i, j)) continue;
      oracle += ReprojectionError(p.views[j].pose, p.views[j].intrinsics, p.points[i],
                                  *p.obs.Find(i, j));
    }
  }
  EXPECT_NEAR(SfmObjective(p.views, p.points, p.vis, p.obs), oracle, 1e-9);
}

TEST(SfmObjective, AdditiveOverCameraPartition) {
  const auto p = MakeProblem(23, 1.5);
  const std::vector<CameraId> a{0, 2};
  const std::vector<CameraId> b{1};
  EXPECT_NEAR(SfmObjective(p.views, p.points, p.vis, p.obs, a) +
                  SfmObjective(p.views, p.points, p.vis, p.obs, b),
              SfmObjective(p.views, p.points, p.vis, p.obs), 1e-9);
}

TEST(SfmObjective, MissingObservation) {
  auto p = MakeProblem(24, 0.0);
  ObservationTable partial;
  partial.Set(0, 0, Pixel(0, 0));
  try {
    SfmObjective(p.views, p.points, p.vis, partial);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingObservation);
  }
}

TEST(VisibilityMatrix, CrossIndexConsistent) {
  const auto vis = VisibilityMatrix::FromCameraLists(4, {{0, 1, 1, 3}, {1, 2}, {}});
  EXPECT_TRUE(vis.IsConsistent());
  EXPECT_EQ(vis.NumEntries(), 5u);
  EXPECT_TRUE(vis.Visible(1, 0));
  EXPECT_FALSE(vis.Visible(2, 0));
  EXPECT_EQ(vis.CamerasOf(1).size(), 2u);
  EXPECT_FALSE(vis.EveryPointSeenBy(2));
  EXPECT_EQ(vis, VisibilityMatrix::FromPointLists(3, {{0}, {0, 1}, {1}, {0}}));

  const std::vector<PointId> ids{3, 1};
  const auto sub = vis.Subset(ids);
  EXPECT_EQ(sub.num_points(), 2u);
  EXPECT_TRUE(sub.Visible(0, 0));
  EXPECT_TRUE(sub.Visible(1, 1));
  EXPECT_TRUE(sub.IsConsistent());
}

TEST(Rotation, ExpAndNearest) {
  const Eigen::Vector3d w(0.1, -0.2, 0.3);
  const Eigen::Matrix3d r = ExpRotation(w);
  EXPECT_TRUE(CameraPose::IsRotation(r));
  EXPECT_LT((ExpRotation(Eigen::Vector3d::Zero()) - Eigen::Matrix3d::Identity()).norm(), 1e-15);
  Eigen::Matrix3d noisy = r;
  noisy(0, 0) += 1e-4;
  EXPECT_TRUE(CameraPose::IsRotation(NearestRotation(noisy)));
  EXPECT_LT((NearestRotation(noisy) - r).norm(), 1e-3);
  EXPECT_LT((Hat(w) * Eigen::Vector3d(1, 2, 3) - w.cross(Eigen::Vector3d(1, 2, 3))).norm(),
            1e-15);
}

}  // namespace
}  // namespace vloc
