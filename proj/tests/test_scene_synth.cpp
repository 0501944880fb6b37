#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "vloc/compression.hpp"
#include "vloc/scene_synth.hpp"

namespace vloc {
namespace {

SceneSpec SmallSpec(std::uint64_t seed = 5) {
  SceneSpec spec;
  spec.plane_point_counts = {200, 150};
  spec.line_point_counts = {60};
  spec.num_clutter = 80;
  spec.num_cameras = 12;
  spec.seed = seed;
  return spec;
}

TEST(GenerateScene, PlanePointsLieOnPlane) {
  SceneSpec spec;
  spec.num_planes = 1;
  spec.points_per_plane = 100;
  spec.num_lines = 0;
  spec.num_clutter = 0;
  spec.num_cameras = 5;
  spec.arc_degrees = 40.0;
  const auto scene = GenerateScene(spec);
  ASSERT_EQ(scene.num_points(), 100u);
  const auto& st = scene.structures[0];
  for (const auto& p : scene.points) {
    EXPECT_LT(std::abs((p - st.anchor).dot(st.direction)), 1e-9);
  }
}

TEST(GenerateScene, Deterministic) {
  const auto a = GenerateScene(SmallSpec());
  const auto b = GenerateScene(SmallSpec());
  EXPECT_EQ(a.points, b.points);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.descriptors, b.descriptors);
  EXPECT_EQ(a.visibility, b.visibility);
  ASSERT_EQ(a.cameras.size(), b.cameras.size());
  for (std::size_t j = 0; j < a.cameras.size(); ++j) {
    EXPECT_EQ(a.cameras[j].pose, b.cameras[j].pose);
  }
  const auto c = GenerateScene(SmallSpec(6));
  EXPECT_NE(a.points, c.points);
}

TEST(GenerateScene, StructureProportionsFromTrueLabels) {
  SceneSpec spec;
  spec.plane_point_counts = {60, 30, 10};
  spec.num_lines = 0;
  spec.num_clutter = 0;
  spec.min_points_per_camera = 1;
  const auto scene = GenerateScene(spec);
  const auto labeling = testing::GroundTruthLabeling(scene);
  const auto w = AssignWeights(labeling, scene.num_points());
  for (PointId i = 0; i < scene.num_points(); ++i) {
    const double expected = std::array{0.6, 0.3, 0.1}[scene.labels[i]];
    EXPECT_NEAR(w.weights[i], expected, 1e-12);
  }
}

TEST(GenerateScene, Invariants) {
  const auto scene = GenerateScene(SmallSpec());
  EXPECT_EQ(scene.num_points(), 490u);
  EXPECT_TRUE(scene.visibility.IsConsistent());
  EXPECT_TRUE(scene.visibility.EveryPointSeenBy(2));
  for (CameraId j = 0; j < scene.cameras.size(); ++j) {
    EXPECT_GE(scene.visibility.PointsOf(j).size(), 6u);
  }
  for (Eigen::Index i = 0; i < scene.descriptors.cols(); ++i) {
    EXPECT_NEAR(scene.descriptors.col(i).cast<double>().norm(), 1.0, 1e-6);
  }
  for (int l : scene.labels) {
    EXPECT_TRUE(l == kClutterLabel || (l >= 0 && l < static_cast<int>(scene.structures.size())));
  }
  // Visible entries must project into the image in front of the camera.
  for (PointId i = 0; i < scene.num_points(); ++i) {
    for (CameraId j : scene.visibility.CamerasOf(i)) {
      const auto px = TryProject(scene.cameras[j].pose, scene.cameras[j].intrinsics, scene.points[i]);
      ASSERT_TRUE(px);
      EXPECT_TRUE(scene.cameras[j].intrinsics.InBounds(*px));
    }
  }
}

TEST(GenerateScene, InfeasibleWhenCameraSeesTooLittle) {
  SceneSpec spec = SmallSpec();
  spec.plane_point_counts = {5};
  spec.line_point_counts = {};
  spec.num_lines = 0;
  spec.num_clutter = 0;
  spec.min_points_per_camera = 6;
  try {
    GenerateScene(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasibleSpec);
  }
}

TEST(GenerateScene, RejectsInvalidSpec) {
  SceneSpec spec;
  spec.outlier_fraction = 1.5;
  EXPECT_THROW(GenerateScene(spec), Error);
  spec = SceneSpec{};
  spec.num_clutter = -1;
  EXPECT_THROW(GenerateScene(spec), Error);
}

TEST(RenderView, ZeroNoiseIsExactProjection) {
  const auto scene = GenerateScene(SmallSpec());
  const auto q = RenderView(scene, CameraId{3}, RenderParams{}, 9);
  ASSERT_GE(q.num_features(), 6u);
  for (std::size_t k = 0; k < q.num_features(); ++k) {
    ASSERT_TRUE(q.ground_truth_matches[k]);
    const Pixel exact = Project(q.true_pose, q.intrinsics, scene.points[*q.ground_truth_matches[k]]);
    EXPECT_EQ(q.pixels[k], exact);
    EXPECT_NEAR(q.descriptors.col(k).cast<double>().norm(), 1.0, 1e-6);
  }
}

TEST(RenderView, OutlierFractionHalf) {
  const auto scene = GenerateScene(SmallSpec());
  RenderParams params;
  params.outlier_fraction = 0.5;
  const auto q = RenderView(scene, CameraId{0}, params, 4);
  std::size_t outliers = 0;
  for (const auto& m : q.ground_truth_matches) outliers += m ? 0 : 1;
  EXPECT_EQ(2 * outliers, q.num_features());
  for (const auto& px : q.pixels) EXPECT_TRUE(q.intrinsics.InBounds(px));
}

TEST(RenderView, PixelNoiseStatistics) {
  const auto scene = GenerateScene(SmallSpec());
  RenderParams params;
  params.pixel_noise_sigma = 1.0;
  std::vector<double> dx;
  std::vector<double> dy;
  for (std::uint64_t s = 0; dx.size() < 1000; ++s) {
    const auto q = RenderView(scene, static_cast<CameraId>(s % scene.cameras.size()), params, s);
    for (std::size_t k = 0; k < q.num_features(); ++k) {
      const Pixel d = q.pixels[k] - Project(q.true_pose, q.intrinsics, scene.points[*q.ground_truth_matches[k]]);
      dx.push_back(d.x());
      dy.push_back(d.y());
    }
  }
  auto stdev = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / v.size());
  };
  EXPECT_GE(stdev(dx), 0.9);
  EXPECT_LE(stdev(dx), 1.1);
  EXPECT_GE(stdev(dy), 0.9);
  EXPECT_LE(stdev(dy), 1.1);
}

TEST(RenderView, GroundTruthMatchesAreVisible) {
  const auto scene = GenerateScene(SmallSpec());
  RenderParams params{1.0, 0.03, 0.2, 0.3};
  Rng rng = MakeRng(3);
  for (int t = 0; t < 5; ++t) {
    const CameraView view = SampleArcViewpoint(scene.spec, rng);
    const auto q = RenderView(scene, view, params, t);
    for (const auto& m : q.ground_truth_matches) {
      if (!m) continue;
      const int l = scene.labels[*m];
      const TrueStructure* st = l == kClutterLabel ? nullptr : &scene.structures[l];
      EXPECT_TRUE(synth_detail::GeometricallyVisible(view, scene.points[*m], st));
    }
  }
}

TEST(RenderView, TooFewVisible) {
  const auto scene = GenerateScene(SmallSpec());
  CameraView away = scene.cameras[0];
  away.pose = CameraPose::LookAt(Point3D(0, -15, 1), Point3D(0, -30, 1), Eigen::Vector3d::UnitZ());
  try {
    RenderView(scene, away, RenderParams{}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewVisible);
  }
}

TEST(BuildModel, ZeroNoiseKeepsPositions) {
  const auto scene = GenerateScene(SmallSpec());
  const auto model = BuildModel(scene, 0.0, 2);
  EXPECT_EQ(model.positions, scene.points);
  EXPECT_NO_THROW(model.Validate());
  for (PointId i = 0; i < model.num_points(); ++i) {
    EXPECT_EQ(model.NumDescriptorsOf(i), scene.visibility.CamerasOf(i).size());
  }
}

TEST(BuildModel, JitterMeanDisplacement) {
  const auto scene = GenerateScene(SmallSpec());
  ASSERT_GE(scene.num_points(), 400u);
  double total = 0.0;
  std::size_t n = 0;
  for (std::uint64_t s = 1; n < 1000; ++s) {
    const auto model = BuildModel(scene, 0.01, s);
    for (PointId i = 0; i < model.num_points() && n < 1000; ++i, ++n) {
      total += (model.positions[i] - scene.points[i]).norm();
    }
  }
  const double mean = total / n;
  EXPECT_GE(mean, 0.012);
  EXPECT_LE(mean, 0.020);
}

TEST(AppearanceShift, ChangesOnlyDescriptors) {
  const auto scene = GenerateScene(SmallSpec());
  const auto shifted = ApplyAppearanceShift(scene, {7, 0.5, 1.0});
  EXPECT_EQ(shifted.points, scene.points);
  EXPECT_EQ(shifted.visibility, scene.visibility);
  Eigen::Index changed = 0;
  for (Eigen::Index i = 0; i < scene.descriptors.cols(); ++i) {
    changed += scene.descriptors.col(i) != shifted.descriptors.col(i) ? 1 : 0;
  }
  EXPECT_GT(changed, scene.descriptors.cols() / 3);
  EXPECT_LT(changed, 2 * scene.descriptors.cols() / 3);
}

}  // namespace
}  // namespace vloc
