#include <gtest/gtest.h>

#include <numbers>

#include "test_util.hpp"
#include "vloc/structure_detect.hpp"

namespace vloc {
namespace {

using testing::RandomVector;

std::vector<Point3D> PlanePoints(Rng& rng, const Eigen::Vector3d& normal, double offset, int n,
                                 double half = 3.0) {
  const Eigen::Vector3d nn = normal.normalized();
  const Eigen::Vector3d e1 = nn.unitOrthogonal();
  const Eigen::Vector3d e2 = nn.cross(e1);
  std::vector<Point3D> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(offset * nn + Uniform(rng, -half, half) * e1 + Uniform(rng, -half, half) * e2);
  }
  return out;
}

std::vector<Point3D> LinePoints(Rng& rng, const Point3D& anchor, const Eigen::Vector3d& dir,
                                int n, double half = 3.0) {
  std::vector<Point3D> out;
  for (int i = 0; i < n; ++i) out.push_back(anchor + Uniform(rng, -half, half) * dir.normalized());
  return out;
}

Eigen::Vector3d LeastSquaresNormal(const std::vector<Point3D>& pts) {
  Point3D c = Point3D::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Eigen::MatrixXd a(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) a.row(i) = (pts[i] - c).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  return svd.matrixV().col(2);
}

double AngleDeg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = std::min(1.0, std::abs(a.normalized().dot(b.normalized())));
  return std::acos(c) * 180.0 / std::numbers::pi;
}

TEST(DetectPlanes, SinglePlane) {
  Rng rng = MakeRng(1);
  const Eigen::Vector3d n(0.2, -1.0, 0.3);
  const auto pts = PlanePoints(rng, n, 2.0, 100);
  const auto planes = DetectPlanes(pts, DetectParams{});
  ASSERT_EQ(planes.size(), 1u);
  EXPECT_EQ(planes[0].member_ids.size(), 100u);
  EXPECT_NEAR(planes[0].normal.norm(), 1.0, 1e-9);
  EXPECT_LT(AngleDeg(planes[0].normal, LeastSquaresNormal(pts)), 0.5);
}

TEST(DetectPlanes, ThreePoints) {
  const std::vector<Point3D> pts{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  DetectParams params;
  params.min_members = 3;
  const auto planes = DetectPlanes(pts, params);
  ASSERT_EQ(planes.size(), 1u);
  EXPECT_EQ(planes[0].member_ids.size(), 3u);
}

TEST(DetectPlanes, ParallelPlanesLargerFirst) {
  Rng rng = MakeRng(2);
  auto pts = PlanePoints(rng, Eigen::Vector3d::UnitZ(), 0.0, 30);
  const auto big = PlanePoints(rng, Eigen::Vector3d::UnitZ(), 1.0, 60);
  pts.insert(pts.end(), big.begin(), big.end());
  const auto planes = DetectPlanes(pts, DetectParams{});
  ASSERT_GE(planes.size(), 1u);
  EXPECT_EQ(planes[0].member_ids.size(), 60u);
  for (PointId i : planes[0].member_ids) EXPECT_GE(i, 30u);
}

TEST(DetectLines, Collinear) {
  Rng rng = MakeRng(3);
  const auto pts = LinePoints(rng, Point3D(1, 2, 3), Eigen::Vector3d(1, 1, 0), 50);
  const auto lines = DetectLines(pts, DetectParams{});
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(lines[0].member_ids.size(), 50u);
  EXPECT_NEAR(lines[0].direction.norm(), 1.0, 1e-9);
}

TEST(DetectLines, TwoPerpendicularLines) {
  Rng rng = MakeRng(4);
  auto pts = LinePoints(rng, Point3D(0, 0, 0), Eigen::Vector3d::UnitX(), 30);
  const auto b = LinePoints(rng, Point3D(0, 0, 1), Eigen::Vector3d::UnitY(), 30);
  pts.insert(pts.end(), b.begin(), b.end());
  const auto lines = DetectLines(pts, DetectParams{});
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0].member_ids.size(), 30u);
  EXPECT_EQ(lines[1].member_ids.size(), 30u);
}

TEST(DetectLines, ClutterYieldsNothing) {
  int empty = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng = MakeRng(seed, 99);
    std::vector<Point3D> pts;
    for (int i = 0; i < 30; ++i) pts.push_back(RandomVector(rng, 0.0, 10.0));
    DetectParams params;
    params.min_members = 20;
    params.inlier_threshold = 0.01;
    params.seed = seed;
    empty += DetectLines(pts, params).empty() ? 1 : 0;
  }
  EXPECT_GE(empty, 99);
}

std::vector<Point3D> MixedScene(Rng& rng) {
  auto pts = PlanePoints(rng, Eigen::Vector3d::UnitZ(), 0.0, 100);
  const auto line = LinePoints(rng, Point3D(0, 0, 2), Eigen::Vector3d(1, 0, 1), 40, 1.5);
  pts.insert(pts.end(), line.begin(), line.end());
  for (int i = 0; i < 10; ++i) {
    // Far from both structures.
    pts.push_back(Point3D(Uniform(rng, -3, 3), Uniform(rng, 5, 8), Uniform(rng, -5, -1)));
  }
  return pts;
}

TEST(DetectStructures, PlaneLineClutter) {
  Rng rng = MakeRng(5);
  const auto pts = MixedScene(rng);
  std::vector<DetectionRound> trace;
  const auto labeling = DetectStructures(pts, DetectParams{}, &trace);
  ASSERT_EQ(labeling.structures.size(), 2u);
  EXPECT_TRUE(IsPlane(labeling.structures[0]));
  EXPECT_FALSE(IsPlane(labeling.structures[1]));
  EXPECT_EQ(MembersOf(labeling.structures[0]).size(), 100u);
  EXPECT_EQ(MembersOf(labeling.structures[1]).size(), 40u);
  EXPECT_EQ(labeling.residual_ids.size(), 10u);
  EXPECT_TRUE(labeling.IsPartition());
  // Winner of each round has the maximum consensus among sampled hypotheses.
  for (const auto& r : trace) EXPECT_EQ(r.consensus, r.max_sampled_consensus);
}

TEST(DetectStructures, MembersWithinThreshold) {
  Rng rng = MakeRng(6);
  auto pts = MixedScene(rng);
  for (auto& p : pts) p += 0.01 * RandomVector(rng, -1, 1);
  DetectParams params;
  const auto labeling = DetectStructures(pts, params);
  EXPECT_TRUE(labeling.IsPartition());
  for (const auto& s : labeling.structures) {
    std::visit(
        [&](const auto& st) {
          for (PointId i : st.member_ids) EXPECT_LE(st.Distance(pts[i]), params.inlier_threshold);
        },
        s);
  }
}

TEST(DetectStructures, AllClutter) {
  Rng rng = MakeRng(7);
  std::vector<Point3D> pts;
  for (int i = 0; i < 30; ++i) pts.push_back(RandomVector(rng, 0.0, 10.0));
  DetectParams params;
  params.inlier_threshold = 0.01;
  const auto labeling = DetectStructures(pts, params);
  EXPECT_TRUE(labeling.structures.empty());
  EXPECT_EQ(labeling.residual_ids.size(), 30u);
}

TEST(DetectStructures, SinglePlaneNoResidual) {
  Rng rng = MakeRng(8);
  const auto pts = PlanePoints(rng, Eigen::Vector3d(1, 1, 1), -1.0, 80);
  const auto labeling = DetectStructures(pts, DetectParams{});
  ASSERT_EQ(labeling.structures.size(), 1u);
  EXPECT_TRUE(labeling.residual_ids.empty());
}

TEST(DetectStructures, Deterministic) {
  Rng rng = MakeRng(9);
  auto pts = MixedScene(rng);
  for (auto& p : pts) p += 0.02 * RandomVector(rng, -1, 1);
  EXPECT_EQ(DetectStructures(pts, DetectParams{}), DetectStructures(pts, DetectParams{}));
}

TEST(DetectStructures, EmptyInput) {
  EXPECT_THROW(DetectStructures(std::vector<Point3D>{}, DetectParams{}), Error);
}

}  // namespace
}  // namespace vloc
