#pragma once

#include <Eigen/Dense>

#include "vloc/geometry.hpp"
#include "vloc/scene_synth.hpp"
#include "vloc/structure_detect.hpp"
#include "vloc/random.hpp"

namespace vloc::testing {

inline Eigen::Matrix3d RandomRotation(Rng& rng) {
  Gaussian g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline Eigen::Vector3d RandomVector(Rng& rng, double lo, double hi) {
  return {Uniform(rng, lo, hi), Uniform(rng, lo, hi), Uniform(rng, lo, hi)};
}

inline CameraIntrinsics StandardIntrinsics() {
  CameraIntrinsics k;
  k.focal_x = 1000.0;
  k.focal_y = 1000.0;
  k.principal_x = 450.0;
  k.principal_y = 300.0;
  return k;
}

// Camera looking at the origin from a random direction at distance `dist`.
inline CameraPose RandomLookAtPose(Rng& rng, double dist) {
  Eigen::Vector3d dir = RandomVector(rng, -1.0, 1.0);
  while (dir.norm() < 0.1 || std::abs(dir.normalized().z()) > 0.95) {
    dir = RandomVector(rng, -1.0, 1.0);
  }
  return CameraPose::LookAt(dist * dir.normalized(), Eigen::Vector3d::Zero(),
                            Eigen::Vector3d::UnitZ());
}

// Labeling read off the planted structures.
inline StructureLabeling GroundTruthLabeling(const GroundTruthScene& scene) {
  StructureLabeling out;
  out.num_points = scene.num_points();
  for (const auto& st : scene.structures) {
    if (st.kind == StructureKind::kPlane) {
      PlaneStructure p;
      p.normal = st.direction;
      p.offset = st.direction.dot(st.anchor);
      out.structures.emplace_back(p);
    } else {
      LineStructure l;
      l.anchor = st.anchor;
      l.direction = st.direction;
      out.structures.emplace_back(l);
    }
  }
  for (PointId i = 0; i < scene.num_points(); ++i) {
    const int l = scene.labels[i];
    if (l == kClutterLabel) {
      out.residual_ids.push_back(i);
    } else {
      std::visit([&](auto& s) { s.member_ids.push_back(i); }, out.structures[l]);
    }
  }
  return out;
}

}  // namespace vloc::testing
