#pragma once

#include <vector>

#include "test_util.hpp"
#include "vloc/pose_estimation.hpp"

namespace vloc::testing {

struct Problem {
  CameraPose pose;
  CameraIntrinsics intrinsics;
  std::vector<PointMatch> matches;
};

// Points in a 10 m cube around the origin seen from ~20 m.
inline Problem MakeProblem(std::uint64_t seed, int n, double noise = 0.0, int outliers = 0) {
  Rng rng = MakeRng(seed, 17);
  Gaussian g;
  Problem p;
  p.pose = testing::RandomLookAtPose(rng, 20.0);
  p.intrinsics = StandardIntrinsics();
  while (static_cast<int>(p.matches.size()) < n) {
    const Point3D x = RandomVector(rng, -5, 5);
    const Pixel u = Project(p.pose, p.intrinsics, x);
    if (!p.intrinsics.InBounds(u)) continue;
    p.matches.push_back({u + noise * Pixel(g(rng), g(rng)), x});
  }
  for (int k = 0; k < outliers; ++k) {
    p.matches.push_back({Pixel(Uniform(rng, 0, 900), Uniform(rng, 0, 600)), RandomVector(rng, -5, 5)});
  }
  return p;
}

struct RansacTrial {
  CameraView view;
  double scene_extent = 0.0;
  // The first `num_inliers` entries are true correspondences.
  std::vector<PointMatch> matches;
  std::size_t num_inliers = 0;
};

// Noisy true correspondences of a synthetic scene viewed from a random arc
// viewpoint, followed by outliers pairing random pixels with random points.
inline RansacTrial MakeRansacTrial(std::uint64_t seed, int inliers = 70, int outliers = 30,
                                   double pixel_sigma = 0.5) {
  SceneSpec spec;
  spec.seed = seed + 1;
  const auto scene = GenerateScene(spec);
  Rng rng = MakeRng(seed, 77);
  Gaussian g;
  RansacTrial t;
  t.scene_extent = spec.scene_extent;
  t.view = SampleArcViewpoint(spec, rng);
  std::vector<PointId> visible;
  for (PointId i = 0; i < scene.num_points(); ++i) {
    const int l = scene.labels[i];
    if (synth_detail::GeometricallyVisible(t.view, scene.points[i],
                                           l == kClutterLabel ? nullptr : &scene.structures[l])) {
      visible.push_back(i);
    }
  }
  for (std::size_t k = visible.size(); k > 1; --k) {
    std::swap(visible[k - 1], visible[UniformIndex(rng, k)]);
  }
  for (int k = 0; k < inliers && k < static_cast<int>(visible.size()); ++k) {
    const Point3D& x = scene.points[visible[k]];
    t.matches.push_back(
        {Project(t.view.pose, t.view.intrinsics, x) + pixel_sigma * Pixel(g(rng), g(rng)), x});
  }
  t.num_inliers = t.matches.size();
  for (int k = 0; k < outliers; ++k) {
    t.matches.push_back({Pixel(Uniform(rng, 0, t.view.intrinsics.image_width),
                               Uniform(rng, 0, t.view.intrinsics.image_height)),
                         scene.points[UniformIndex(rng, scene.num_points())]});
  }
  return t;
}

}  // namespace vloc::testing
