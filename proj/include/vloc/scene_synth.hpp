#pragma once

// Synthetic ground-truth scenes: planar facades, linear structures and
// clutter observed by cameras on a viewing arc, with SIFT-like descriptors.
// Replaces image capture and reconstruction for desk-scale experiments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "vloc/error.hpp"
#include "vloc/geometry.hpp"
#include "vloc/model.hpp"
#include "vloc/random.hpp"

namespace vloc {

struct SceneSpec {
  int num_planes = 3;
  int num_lines = 1;
  int points_per_plane = 300;
  int points_per_line = 60;
  // Per-structure sizes; when non-empty they override num_* / points_per_*.
  std::vector<int> plane_point_counts;
  std::vector<int> line_point_counts;
  int num_clutter = 100;
  double scene_extent = 10.0;
  int num_cameras = 20;
  int descriptor_dim = 128;
  double descriptor_noise_sigma = 0.03;
  double pixel_noise_sigma = 1.0;
  double outlier_fraction = 0.2;
  std::uint64_t seed = 1;

  int image_width = 900;
  int image_height = 600;
  double focal_length = 1000.0;
  // Total angle of the camera arc, degrees.
  double arc_degrees = 120.0;
  // Look-at targets are jittered uniformly within +-this fraction of extent.
  double look_at_jitter = 0.3;
  double visibility_dropout = 0.3;
  int min_points_per_camera = 6;
  int min_views_per_point = 2;

  std::vector<int> PlaneCounts() const {
    if (!plane_point_counts.empty()) return plane_point_counts;
    return std::vector<int>(std::max(num_planes, 0), points_per_plane);
  }
  std::vector<int> LineCounts() const {
    if (!line_point_counts.empty()) return line_point_counts;
    return std::vector<int>(std::max(num_lines, 0), points_per_line);
  }

  void Validate() const {
    const auto nonneg = [](int v) { return v >= 0; };
    Require(num_planes >= 0 && num_lines >= 0 && points_per_plane >= 0 &&
                points_per_line >= 0 && num_clutter >= 0 && num_cameras >= 0,
            ErrorCode::kInvalidArgument, "scene counts must be >= 0");
    Require(std::all_of(plane_point_counts.begin(), plane_point_counts.end(),
                        nonneg) &&
                std::all_of(line_point_counts.begin(), line_point_counts.end(),
                            nonneg),
            ErrorCode::kInvalidArgument, "structure sizes must be >= 0");
    Require(scene_extent > 0.0, ErrorCode::kInvalidArgument,
            "scene extent must be positive");
    Require(descriptor_dim > 0, ErrorCode::kInvalidArgument,
            "descriptor dimension must be positive");
    Require(descriptor_noise_sigma >= 0.0 && pixel_noise_sigma >= 0.0,
            ErrorCode::kInvalidArgument, "noise sigmas must be >= 0");
    Require(outlier_fraction >= 0.0 && outlier_fraction <= 1.0,
            ErrorCode::kInvalidArgument, "outlier fraction must be in [0, 1]");
    Require(visibility_dropout >= 0.0 && visibility_dropout < 1.0,
            ErrorCode::kInvalidArgument, "dropout must be in [0, 1)");
    Require(image_width > 0 && image_height > 0 && focal_length > 0.0,
            ErrorCode::kInvalidArgument, "invalid camera model");
  }
};

enum class StructureKind : std::uint8_t { kPlane, kLine };

// Planted structure. For planes `direction` is the unit normal and `anchor`
// the patch center; for lines `direction` is the unit direction.
struct TrueStructure {
  StructureKind kind = StructureKind::kPlane;
  Point3D anchor = Point3D::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();
};

inline constexpr int kClutterLabel = -1;

struct GroundTruthScene {
  SceneSpec spec;
  std::vector<Point3D> points;
  // Index into `structures`, or kClutterLabel.
  std::vector<int> labels;
  std::vector<TrueStructure> structures;
  // One reference unit descriptor per point (columns).
  DescriptorMatrix descriptors;
  std::vector<CameraView> cameras;
  VisibilityMatrix visibility;

  std::size_t num_points() const { return points.size(); }
};

struct RenderParams {
  double pixel_noise_sigma = 0.0;
  double descriptor_noise_sigma = 0.0;
  double outlier_fraction = 0.0;
  // Probability of independently dropping each visible point.
  double visibility_dropout = 0.0;

  static RenderParams FromSpec(const SceneSpec& spec) {
    return {spec.pixel_noise_sigma, spec.descriptor_noise_sigma,
            spec.outlier_fraction, 0.0};
  }
};

struct QueryView {
  CameraPose true_pose;
  CameraIntrinsics intrinsics;
  std::vector<Pixel> pixels;
  DescriptorMatrix descriptors;
  // Test-only: source point of each feature, nullopt for outlier features.
  std::vector<std::optional<PointId>> ground_truth_matches;

  std::size_t num_features() const { return pixels.size(); }
};

namespace synth_detail {

inline Eigen::Vector3d RandomUnit(Rng& rng, Gaussian& g) {
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

inline void FillRandomDescriptor(Rng& rng, Gaussian& g,
                                 Eigen::Ref<Eigen::VectorXf> out) {
  Eigen::VectorXd v(out.size());
  do {
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = g(rng);
  } while (v.norm() < 1e-9);
  out = (v / v.norm()).cast<float>();
}

inline void FillNoisyDescriptor(Rng& rng, Gaussian& g,
                                const Eigen::Ref<const Eigen::VectorXf>& ref,
                                double sigma, Eigen::Ref<Eigen::VectorXf> out) {
  Eigen::VectorXd v = ref.cast<double>();
  if (sigma > 0.0) {
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] += sigma * g(rng);
  }
  const double n = v.norm();
  out = n > 1e-12 ? (v / n).cast<float>() : ref;
}

// Two unit vectors spanning the plane orthogonal to `n`.
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> PlaneBasis(
    const Eigen::Vector3d& n) {
  const Eigen::Vector3d helper = std::abs(n.z()) < 0.9
                                     ? Eigen::Vector3d::UnitZ()
                                     : Eigen::Vector3d::UnitX();
  const Eigen::Vector3d e1 = n.cross(helper).normalized();
  return {e1, n.cross(e1)};
}

struct StructureSampler {
  TrueStructure structure;
  double half_u = 0.0;
  double half_v = 0.0;
  Eigen::Vector3d e1 = Eigen::Vector3d::UnitX();
  Eigen::Vector3d e2 = Eigen::Vector3d::UnitY();

  Point3D Sample(Rng& rng) const {
    if (structure.kind == StructureKind::kPlane) {
      return structure.anchor + Uniform(rng, -half_u, half_u) * e1 +
             Uniform(rng, -half_v, half_v) * e2;
    }
    return structure.anchor + Uniform(rng, -half_u, half_u) * structure.direction;
  }
};

// Geometric visibility: in front of the camera, inside the image, and on the
// front side of its plane (plane points only).
inline bool GeometricallyVisible(const CameraView& view, const Point3D& p,
                                 const TrueStructure* plane) {
  if (plane != nullptr && plane->kind == StructureKind::kPlane) {
    if ((view.pose.Center() - p).dot(plane->direction) <= 0.0) return false;
  }
  const auto px = TryProject(view.pose, view.intrinsics, p);
  return px && view.intrinsics.InBounds(*px);
}

}  // namespace synth_detail

// Camera on the viewing arc at angle `theta` (radians from the arc center)
// aimed at `target`.
inline CameraView ArcCamera(const SceneSpec& spec, double theta,
                            const Point3D& target) {
  const double radius = 1.5 * spec.scene_extent;
  const double height = 0.1 * spec.scene_extent;
  const Point3D eye(radius * std::sin(theta), -radius * std::cos(theta), height);
  CameraView view;
  view.pose = CameraPose::LookAt(eye, target, Eigen::Vector3d::UnitZ());
  view.intrinsics.focal_x = spec.focal_length;
  view.intrinsics.focal_y = spec.focal_length;
  view.intrinsics.principal_x = spec.image_width / 2.0;
  view.intrinsics.principal_y = spec.image_height / 2.0;
  view.intrinsics.image_width = spec.image_width;
  view.intrinsics.image_height = spec.image_height;
  return view;
}

// Random viewpoint on the arc, as used for held-out query views.
inline CameraView SampleArcViewpoint(const SceneSpec& spec, Rng& rng) {
  const double half_arc = spec.arc_degrees * std::numbers::pi / 360.0;
  const double theta = Uniform(rng, -half_arc, half_arc);
  const double j = spec.look_at_jitter * spec.scene_extent;
  const Point3D target(Uniform(rng, -j, j), Uniform(rng, -0.5 * j, 0.5 * j),
                       Uniform(rng, -0.5 * j, 0.5 * j));
  return ArcCamera(spec, theta, target);
}

inline GroundTruthScene GenerateScene(const SceneSpec& spec) {
  using namespace synth_detail;
  spec.Validate();
  GroundTruthScene scene;
  scene.spec = spec;
  const double e = spec.scene_extent;

  // Cameras: evenly spaced on the arc, each aimed at a jittered target.
  Rng cam_rng = MakeRng(spec.seed, 1);
  const double half_arc = spec.arc_degrees * std::numbers::pi / 360.0;
  for (int c = 0; c < spec.num_cameras; ++c) {
    const double theta =
        spec.num_cameras == 1
            ? 0.0
            : -half_arc + 2.0 * half_arc * c / (spec.num_cameras - 1);
    const double j = spec.look_at_jitter * e;
    const Point3D target(Uniform(cam_rng, -j, j),
                         Uniform(cam_rng, -0.5 * j, 0.5 * j),
                         Uniform(cam_rng, -0.5 * j, 0.5 * j));
    scene.cameras.push_back(ArcCamera(spec, theta, target));
  }

  // Structures: facades facing the arc and free 3D lines.
  Rng geo_rng = MakeRng(spec.seed, 2);
  Gaussian gauss;
  std::vector<StructureSampler> samplers;
  for (std::size_t l = 0; l < spec.PlaneCounts().size(); ++l) {
    StructureSampler s;
    s.structure.kind = StructureKind::kPlane;
    s.structure.anchor = Point3D(Uniform(geo_rng, -0.3 * e, 0.3 * e),
                                 Uniform(geo_rng, -0.3 * e, 0.3 * e),
                                 Uniform(geo_rng, -0.2 * e, 0.2 * e));
    const Eigen::Vector3d tilt(Uniform(geo_rng, -0.8, 0.8), 0.0,
                               Uniform(geo_rng, -0.8, 0.8));
    s.structure.direction = (Eigen::Vector3d(0, -1, 0) + tilt).normalized();
    std::tie(s.e1, s.e2) = PlaneBasis(s.structure.direction);
    s.half_u = 0.5 * e * Uniform(geo_rng, 0.4, 0.8);
    s.half_v = 0.5 * e * Uniform(geo_rng, 0.3, 0.6);
    samplers.push_back(s);
  }
  for (std::size_t l = 0; l < spec.LineCounts().size(); ++l) {
    StructureSampler s;
    s.structure.kind = StructureKind::kLine;
    s.structure.anchor = Point3D(Uniform(geo_rng, -0.3 * e, 0.3 * e),
                                 Uniform(geo_rng, -0.3 * e, 0.3 * e),
                                 Uniform(geo_rng, -0.2 * e, 0.2 * e));
    s.structure.direction = RandomUnit(geo_rng, gauss);
    s.half_u = 0.5 * e * Uniform(geo_rng, 0.4, 0.8);
    samplers.push_back(s);
  }
  for (const auto& s : samplers) scene.structures.push_back(s.structure);

  std::vector<int> counts = spec.PlaneCounts();
  const auto line_counts = spec.LineCounts();
  counts.insert(counts.end(), line_counts.begin(), line_counts.end());

  // Points are redrawn until geometrically visible from enough cameras so
  // the requested per-structure counts are honored exactly.
  Rng pt_rng = MakeRng(spec.seed, 3);
  const int min_views = std::min(spec.min_views_per_point, spec.num_cameras);
  const auto visible_count = [&](const Point3D& p, const TrueStructure* st) {
    int n = 0;
    for (const auto& cam : scene.cameras) {
      n += GeometricallyVisible(cam, p, st) ? 1 : 0;
    }
    return n;
  };
  constexpr int kMaxDraws = 200;
  for (std::size_t l = 0; l < counts.size(); ++l) {
    for (int n = 0; n < counts[l]; ++n) {
      Point3D p;
      int draws = 0;
      do {
        Require(++draws <= kMaxDraws, ErrorCode::kInfeasibleSpec,
                "structure points are not visible from enough cameras");
        p = samplers[l].Sample(pt_rng);
      } while (visible_count(p, &samplers[l].structure) < min_views);
      scene.points.push_back(p);
      scene.labels.push_back(static_cast<int>(l));
    }
  }
  for (int n = 0; n < spec.num_clutter; ++n) {
    Point3D p;
    int draws = 0;
    do {
      Require(++draws <= kMaxDraws, ErrorCode::kInfeasibleSpec,
              "clutter points are not visible from enough cameras");
      p = Point3D(Uniform(pt_rng, -0.5 * e, 0.5 * e),
                  Uniform(pt_rng, -0.5 * e, 0.5 * e),
                  Uniform(pt_rng, -0.5 * e, 0.5 * e));
    } while (visible_count(p, nullptr) < min_views);
    scene.points.push_back(p);
    scene.labels.push_back(kClutterLabel);
  }

  // Visibility: geometric test with random dropout, then dropped views are
  // restored (in camera order) until each point reaches min_views.
  Rng vis_rng = MakeRng(spec.seed, 4);
  std::vector<std::vector<CameraId>> cams_of(scene.points.size());
  for (PointId i = 0; i < scene.points.size(); ++i) {
    const TrueStructure* st =
        scene.labels[i] == kClutterLabel ? nullptr
                                         : &scene.structures[scene.labels[i]];
    std::vector<CameraId> dropped;
    for (CameraId j = 0; j < scene.cameras.size(); ++j) {
      if (!GeometricallyVisible(scene.cameras[j], scene.points[i], st)) continue;
      if (Uniform01(vis_rng) < spec.visibility_dropout) {
        dropped.push_back(j);
      } else {
        cams_of[i].push_back(j);
      }
    }
    for (CameraId j : dropped) {
      if (static_cast<int>(cams_of[i].size()) >= min_views) break;
      cams_of[i].push_back(j);
    }
  }
  scene.visibility =
      VisibilityMatrix::FromPointLists(scene.cameras.size(), cams_of);
  for (CameraId j = 0; j < scene.cameras.size(); ++j) {
    Require(static_cast<int>(scene.visibility.PointsOf(j).size()) >=
                    std::max(spec.min_points_per_camera, 1),
            ErrorCode::kInfeasibleSpec,
            "camera " + std::to_string(j) + " sees too few points");
  }

  // Reference descriptors, uniform on the unit sphere.
  Rng desc_rng = MakeRng(spec.seed, 5);
  Gaussian desc_gauss;
  scene.descriptors.resize(spec.descriptor_dim, scene.points.size());
  for (Eigen::Index i = 0; i < scene.descriptors.cols(); ++i) {
    FillRandomDescriptor(desc_rng, desc_gauss, scene.descriptors.col(i));
  }
  return scene;
}

// Appearance change of a scene (weather, lighting, season): a fraction of the
// points get descriptors rotated towards fresh random directions.
struct AppearanceShift {
  std::uint64_t seed = 1;
  double changed_fraction = 0.8;
  // 0 keeps the descriptor, 1 replaces it with an independent direction.
  double strength = 1.0;
};

inline GroundTruthScene ApplyAppearanceShift(const GroundTruthScene& scene,
                                             const AppearanceShift& shift) {
  using namespace synth_detail;
  GroundTruthScene out = scene;
  Rng rng = MakeRng(shift.seed, 11);
  Gaussian g;
  Eigen::VectorXf fresh(scene.descriptors.rows());
  for (Eigen::Index i = 0; i < out.descriptors.cols(); ++i) {
    const bool change = Uniform01(rng) < shift.changed_fraction;
    FillRandomDescriptor(rng, g, fresh);
    if (!change) continue;
    Eigen::VectorXf mixed = (1.0f - static_cast<float>(shift.strength)) *
                                out.descriptors.col(i) +
                            static_cast<float>(shift.strength) * fresh;
    const float n = mixed.norm();
    if (n > 1e-6f) out.descriptors.col(i) = mixed / n;
  }
  return out;
}

// Renders the features a camera at `view` would detect.
inline QueryView RenderView(const GroundTruthScene& scene, const CameraView& view,
                            const RenderParams& params, std::uint64_t seed) {
  using namespace synth_detail;
  Require(params.outlier_fraction >= 0.0 && params.outlier_fraction < 1.0,
          ErrorCode::kInvalidArgument, "render outlier fraction must be in [0,1)");
  Rng rng = MakeRng(seed, 21);
  Gaussian g;
  QueryView q;
  q.true_pose = view.pose;
  q.intrinsics = view.intrinsics;

  std::vector<PointId> visible;
  for (PointId i = 0; i < scene.points.size(); ++i) {
    const TrueStructure* st =
        scene.labels[i] == kClutterLabel ? nullptr
                                         : &scene.structures[scene.labels[i]];
    if (GeometricallyVisible(view, scene.points[i], st)) visible.push_back(i);
  }
  Require(visible.size() >= 6, ErrorCode::kTooFewVisible,
          "view sees " + std::to_string(visible.size()) + " points (< 6)");

  struct Feature {
    Pixel pixel;
    std::optional<PointId> source;
  };
  std::vector<Feature> features;
  for (PointId i : visible) {
    if (params.visibility_dropout > 0.0 &&
        Uniform01(rng) < params.visibility_dropout) {
      continue;
    }
    Pixel px = Project(view.pose, view.intrinsics, scene.points[i]);
    if (params.pixel_noise_sigma > 0.0) {
      px += params.pixel_noise_sigma * Pixel(g(rng), g(rng));
    }
    if (!view.intrinsics.InBounds(px)) continue;
    features.push_back({px, i});
  }
  Require(features.size() >= 6, ErrorCode::kTooFewVisible,
          "fewer than 6 features survive rendering");

  const auto num_true = features.size();
  const auto num_outliers = static_cast<std::size_t>(std::llround(
      num_true * params.outlier_fraction / (1.0 - params.outlier_fraction)));
  for (std::size_t k = 0; k < num_outliers; ++k) {
    features.push_back(
        {Pixel(Uniform(rng, 0.0, view.intrinsics.image_width),
               Uniform(rng, 0.0, view.intrinsics.image_height)),
         std::nullopt});
  }
  // Detector output order carries no information about the source point.
  for (std::size_t k = features.size(); k > 1; --k) {
    std::swap(features[k - 1], features[UniformIndex(rng, k)]);
  }

  q.descriptors.resize(scene.descriptors.rows(), features.size());
  for (std::size_t k = 0; k < features.size(); ++k) {
    q.pixels.push_back(features[k].pixel);
    q.ground_truth_matches.push_back(features[k].source);
    if (features[k].source) {
      FillNoisyDescriptor(rng, g, scene.descriptors.col(*features[k].source),
                          params.descriptor_noise_sigma, q.descriptors.col(k));
    } else {
      FillRandomDescriptor(rng, g, q.descriptors.col(k));
    }
  }
  return q;
}

inline QueryView RenderView(const GroundTruthScene& scene, CameraId camera,
                            const RenderParams& params, std::uint64_t seed) {
  Require(camera < scene.cameras.size(), ErrorCode::kInvalidArgument,
          "camera index out of range");
  return RenderView(scene, scene.cameras[camera], params, seed);
}

// Emulates the reconstruction output: jittered positions and one noisy
// descriptor sample per observing camera.
inline PointCloudModel BuildModel(const GroundTruthScene& scene,
                                  double reconstruction_noise_sigma,
                                  std::uint64_t seed) {
  using namespace synth_detail;
  Require(reconstruction_noise_sigma >= 0.0, ErrorCode::kInvalidArgument,
          "reconstruction noise must be >= 0");
  PointCloudModel model;
  model.model_id = DeriveSeed(seed, 31);
  model.descriptor_dim = static_cast<int>(scene.descriptors.rows());
  model.visibility = scene.visibility;
  Rng pos_rng = MakeRng(seed, 32);
  Rng desc_rng = MakeRng(seed, 33);
  Gaussian pos_g;
  Gaussian desc_g;

  model.positions.reserve(scene.points.size());
  model.descriptor_offsets.assign(1, 0);
  std::uint32_t total = 0;
  for (PointId i = 0; i < scene.points.size(); ++i) {
    Point3D p = scene.points[i];
    if (reconstruction_noise_sigma > 0.0) {
      p += reconstruction_noise_sigma *
           Eigen::Vector3d(pos_g(pos_rng), pos_g(pos_rng), pos_g(pos_rng));
    }
    model.positions.push_back(p);
    total += static_cast<std::uint32_t>(scene.visibility.CamerasOf(i).size());
    model.descriptor_offsets.push_back(total);
  }
  model.descriptors.resize(model.descriptor_dim, total);
  for (PointId i = 0; i < scene.points.size(); ++i) {
    for (std::uint32_t c = model.descriptor_offsets[i];
         c < model.descriptor_offsets[i + 1]; ++c) {
      FillNoisyDescriptor(desc_rng, desc_g, scene.descriptors.col(i),
                          scene.spec.descriptor_noise_sigma,
                          model.descriptors.col(c));
    }
  }
  return model;
}

}  // namespace vloc
