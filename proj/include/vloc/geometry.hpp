#pragma once

// Pinhole camera geometry: poses, projection, reprojection error and the
// multi-view reprojection objective used to score reconstructions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vloc/error.hpp"

namespace vloc {

using Point3D = Eigen::Vector3d;
using Pixel = Eigen::Vector2d;
using PointId = std::uint32_t;
using CameraId = std::uint32_t;

// Minimum camera-frame depth for a point to count as in front of the camera.
inline constexpr double kMinDepth = 1e-12;
inline constexpr double kRotationTolerance = 1e-9;

inline bool AllFinite(const Point3D& p) { return p.allFinite(); }

struct CameraIntrinsics {
  double focal_x = 1.0;
  double focal_y = 1.0;
  double principal_x = 0.0;
  double principal_y = 0.0;
  // Zero for physical cameras; DLT decomposition may produce a small value.
  double skew = 0.0;
  int image_width = 900;
  int image_height = 600;

  void Validate() const {
    Require(focal_x > 0.0 && focal_y > 0.0 && std::isfinite(focal_x) &&
                std::isfinite(focal_y),
            ErrorCode::kInvalidArgument, "focal lengths must be positive");
    Require(image_width > 0 && image_height > 0, ErrorCode::kInvalidArgument,
            "image size must be positive");
  }

  Eigen::Matrix3d Matrix() const {
    Eigen::Matrix3d k;
    k << focal_x, skew, principal_x, 0.0, focal_y, principal_y, 0.0, 0.0, 1.0;
    return k;
  }

  static CameraIntrinsics FromMatrix(const Eigen::Matrix3d& k, int width,
                                     int height) {
    CameraIntrinsics intr;
    intr.focal_x = k(0, 0);
    intr.focal_y = k(1, 1);
    intr.skew = k(0, 1);
    intr.principal_x = k(0, 2);
    intr.principal_y = k(1, 2);
    intr.image_width = width;
    intr.image_height = height;
    return intr;
  }

  bool InBounds(const Pixel& px, double margin = 0.0) const {
    return px.x() >= -margin && px.y() >= -margin &&
           px.x() <= image_width + margin && px.y() <= image_height + margin;
  }

  bool operator==(const CameraIntrinsics&) const = default;
};

// World-to-camera rigid transform: x_cam = R * x_world + t.
class CameraPose {
 public:
  CameraPose() = default;

  CameraPose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {
    Require(IsRotation(rotation_), ErrorCode::kInvalidArgument,
            "pose rotation is not orthonormal with det +1");
    Require(translation_.allFinite(), ErrorCode::kInvalidArgument,
            "pose translation is not finite");
  }

  // Pose of a camera located at `center` whose rotation is `rotation`.
  static CameraPose FromCenter(const Eigen::Matrix3d& rotation,
                               const Point3D& center) {
    return CameraPose(rotation, -rotation * center);
  }

  // Camera at `eye` looking at `target`, with image y pointing roughly along
  // -world_up (so "up" in the world is "up" in the image).
  static CameraPose LookAt(const Point3D& eye, const Point3D& target,
                           const Eigen::Vector3d& world_up) {
    const Eigen::Vector3d z = (target - eye).normalized();
    Eigen::Vector3d x = z.cross(world_up);
    Require(x.norm() > 1e-12, ErrorCode::kInvalidArgument,
            "look-at direction parallel to up vector");
    x.normalize();
    const Eigen::Vector3d y = z.cross(x);
    Eigen::Matrix3d r;
    r.row(0) = x.transpose();
    r.row(1) = y.transpose();
    r.row(2) = z.transpose();
    return FromCenter(r, eye);
  }

  static bool IsRotation(const Eigen::Matrix3d& r) {
    if (!r.allFinite()) return false;
    const double ortho =
        (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    return ortho < kRotationTolerance && r.determinant() > 0.0;
  }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Point3D ToCamera(const Point3D& world) const {
    return rotation_ * world + translation_;
  }

  Point3D Center() const { return -rotation_.transpose() * translation_; }

  Eigen::Matrix<double, 3, 4> Matrix() const {
    Eigen::Matrix<double, 3, 4> m;
    m.leftCols<3>() = rotation_;
    m.col(3) = translation_;
    return m;
  }

  bool operator==(const CameraPose&) const = default;

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

struct CameraView {
  CameraPose pose;
  CameraIntrinsics intrinsics;
};

struct Observation {
  PointId point_id = 0;
  Pixel pixel = Pixel::Zero();
};

inline Point3D CameraCenter(const CameraPose& pose) { return pose.Center(); }

// Pixel of a camera-frame point; nullopt when the point is behind the camera.
inline std::optional<Pixel> ProjectCameraFrame(const CameraIntrinsics& intr,
                                               const Point3D& cam) {
  if (!(cam.z() > kMinDepth)) return std::nullopt;
  const double inv_z = 1.0 / cam.z();
  const double x = cam.x() * inv_z;
  const double y = cam.y() * inv_z;
  return Pixel(intr.focal_x * x + intr.skew * y + intr.principal_x,
               intr.focal_y * y + intr.principal_y);
}

inline std::optional<Pixel> TryProject(const CameraPose& pose,
                                       const CameraIntrinsics& intr,
                                       const Point3D& p) {
  return ProjectCameraFrame(intr, pose.ToCamera(p));
}

inline Pixel Project(const CameraPose& pose, const CameraIntrinsics& intr,
                     const Point3D& p) {
  const auto px = TryProject(pose, intr, p);
  if (!px) Fail(ErrorCode::kBehindCamera, "point projects behind the camera");
  return *px;
}

// World point at camera-frame depth `depth` along the ray through `pixel`.
inline Point3D Unproject(const CameraPose& pose, const CameraIntrinsics& intr,
                         const Pixel& pixel, double depth) {
  const double y = (pixel.y() - intr.principal_y) / intr.focal_y;
  const double x = (pixel.x() - intr.principal_x - intr.skew * y) / intr.focal_x;
  const Point3D cam(x * depth, y * depth, depth);
  return pose.rotation().transpose() * (cam - pose.translation());
}

inline double ReprojectionError(const CameraPose& pose,
                                const CameraIntrinsics& intr, const Point3D& p,
                                const Pixel& observed) {
  return (Project(pose, intr, p) - observed).norm();
}

// Binary point/camera visibility, stored sparsely in both directions.
class VisibilityMatrix {
 public:
  VisibilityMatrix() = default;

  VisibilityMatrix(std::size_t num_points, std::size_t num_cameras)
      : cameras_of_point_(num_points), points_of_camera_(num_cameras) {}

  // Builds from per-camera point lists (duplicates are ignored).
  static VisibilityMatrix FromCameraLists(
      std::size_t num_points, const std::vector<std::vector<PointId>>& lists) {
    VisibilityMatrix vis(num_points, lists.size());
    for (CameraId j = 0; j < lists.size(); ++j) {
      for (PointId i : lists[j]) {
        Require(i < num_points, ErrorCode::kInvalidArgument,
                "visibility references unknown point");
        vis.points_of_camera_[j].push_back(i);
        vis.cameras_of_point_[i].push_back(j);
      }
    }
    vis.Canonicalize();
    return vis;
  }

  static VisibilityMatrix FromPointLists(
      std::size_t num_cameras, const std::vector<std::vector<CameraId>>& lists) {
    VisibilityMatrix vis(lists.size(), num_cameras);
    for (PointId i = 0; i < lists.size(); ++i) {
      for (CameraId j : lists[i]) {
        Require(j < num_cameras, ErrorCode::kInvalidArgument,
                "visibility references unknown camera");
        vis.points_of_camera_[j].push_back(i);
        vis.cameras_of_point_[i].push_back(j);
      }
    }
    vis.Canonicalize();
    return vis;
  }

  std::size_t num_points() const { return cameras_of_point_.size(); }
  std::size_t num_cameras() const { return points_of_camera_.size(); }

  std::span<const CameraId> CamerasOf(PointId i) const {
    return cameras_of_point_[i];
  }
  std::span<const PointId> PointsOf(CameraId j) const {
    return points_of_camera_[j];
  }

  bool Visible(PointId i, CameraId j) const {
    const auto& cams = cameras_of_point_[i];
    return std::binary_search(cams.begin(), cams.end(), j);
  }

  std::size_t NumEntries() const {
    std::size_t n = 0;
    for (const auto& c : cameras_of_point_) n += c.size();
    return n;
  }

  // Cross indexes agree and are sorted without duplicates.
  bool IsConsistent() const {
    std::size_t forward = 0;
    for (PointId i = 0; i < cameras_of_point_.size(); ++i) {
      const auto& cams = cameras_of_point_[i];
      if (!std::is_sorted(cams.begin(), cams.end()) ||
          std::adjacent_find(cams.begin(), cams.end()) != cams.end()) {
        return false;
      }
      for (CameraId j : cams) {
        if (j >= points_of_camera_.size()) return false;
        const auto& pts = points_of_camera_[j];
        if (!std::binary_search(pts.begin(), pts.end(), i)) return false;
      }
      forward += cams.size();
    }
    std::size_t backward = 0;
    for (const auto& pts : points_of_camera_) {
      if (!std::is_sorted(pts.begin(), pts.end())) return false;
      backward += pts.size();
    }
    return forward == backward;
  }

  // Reconstructed models require every point to be seen by at least
  // `min_views` cameras; toy instances used for cover problems do not.
  bool EveryPointSeenBy(std::size_t min_views) const {
    return std::all_of(cameras_of_point_.begin(), cameras_of_point_.end(),
                       [&](const auto& c) { return c.size() >= min_views; });
  }

  // Visibility restricted to `ids`, renumbered 0..ids.size()-1 in order.
  VisibilityMatrix Subset(std::span<const PointId> ids) const {
    VisibilityMatrix out(ids.size(), num_cameras());
    for (PointId k = 0; k < ids.size(); ++k) {
      for (CameraId j : cameras_of_point_[ids[k]]) {
        out.cameras_of_point_[k].push_back(j);
        out.points_of_camera_[j].push_back(k);
      }
    }
    out.Canonicalize();
    return out;
  }

  bool operator==(const VisibilityMatrix&) const = default;

 private:
  void Canonicalize() {
    for (auto& v : cameras_of_point_) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    for (auto& v : points_of_camera_) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

  std::vector<std::vector<CameraId>> cameras_of_point_;
  std::vector<std::vector<PointId>> points_of_camera_;
};

// Observed pixel p_ij for each visible (point i, camera j) pair.
class ObservationTable {
 public:
  void Set(PointId i, CameraId j, const Pixel& px) { table_[{i, j}] = px; }

  const Pixel* Find(PointId i, CameraId j) const {
    const auto it = table_.find({i, j});
    return it == table_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return table_.size(); }

 private:
  std::map<std::pair<PointId, CameraId>, Pixel> table_;
};

enum class DistanceKind { kEuclidean, kSquared };

namespace detail {

inline double SfmObjectiveTerm(const std::vector<CameraView>& views,
                               const std::vector<Point3D>& points,
                               const ObservationTable& obs, PointId i,
                               CameraId j, DistanceKind kind) {
  const Pixel* observed = obs.Find(i, j);
  if (observed == nullptr) {
    Fail(ErrorCode::kMissingObservation,
         "no observation for point " + std::to_string(i) + " in camera " +
             std::to_string(j));
  }
  const Pixel diff =
      Project(views[j].pose, views[j].intrinsics, points[i]) - *observed;
  return kind == DistanceKind::kEuclidean ? diff.norm() : diff.squaredNorm();
}

}  // namespace detail

// Sum over visible (i, j) of d(Q(c_j, P_i), p_ij), accumulated point-major in
// ascending (i, j) order.
inline double SfmObjective(const std::vector<CameraView>& views,
                           const std::vector<Point3D>& points,
                           const VisibilityMatrix& vis,
                           const ObservationTable& obs,
                           DistanceKind kind = DistanceKind::kEuclidean) {
  Require(vis.num_points() == points.size() && vis.num_cameras() == views.size(),
          ErrorCode::kInvalidArgument, "visibility shape mismatch");
  double total = 0.0;
  for (PointId i = 0; i < points.size(); ++i) {
    for (CameraId j : vis.CamerasOf(i)) {
      total += detail::SfmObjectiveTerm(views, points, obs, i, j, kind);
    }
  }
  return total;
}

// Objective restricted to the cameras listed in `cameras`.
inline double SfmObjective(const std::vector<CameraView>& views,
                           const std::vector<Point3D>& points,
                           const VisibilityMatrix& vis,
                           const ObservationTable& obs,
                           std::span<const CameraId> cameras,
                           DistanceKind kind = DistanceKind::kEuclidean) {
  double total = 0.0;
  for (CameraId j : cameras) {
    Require(j < views.size(), ErrorCode::kInvalidArgument, "unknown camera");
    for (PointId i : vis.PointsOf(j)) {
      total += detail::SfmObjectiveTerm(views, points, obs, i, j, kind);
    }
  }
  return total;
}

// Skew-symmetric cross-product matrix.
inline Eigen::Matrix3d Hat(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

// Rotation exp(hat(w)) by Rodrigues' formula.
inline Eigen::Matrix3d ExpRotation(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  if (theta < 1e-12) return Eigen::Matrix3d::Identity() + Hat(w);
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

// Projects a near-rotation to the closest rotation (Frobenius norm).
inline Eigen::Matrix3d NearestRotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU |
                                               Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    d(2, 2) = -1.0;
  }
  return svd.matrixU() * d * svd.matrixV().transpose();
}

}  // namespace vloc
