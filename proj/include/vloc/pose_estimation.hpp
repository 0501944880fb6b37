#pragma once

// Camera localization from 2D-3D correspondences: normalized 6-point DLT,
// RQ decomposition, RANSAC with adaptive termination, Levenberg-Marquardt
// pose refinement, and the match -> RANSAC -> refine pipeline.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "vloc/error.hpp"
#include "vloc/geometry.hpp"
#include "vloc/matching.hpp"
#include "vloc/random.hpp"
#include "vloc/scene_synth.hpp"

namespace vloc {

using ProjectionMatrix = Eigen::Matrix<double, 3, 4>;

struct PointMatch {
  Pixel pixel = Pixel::Zero();
  Point3D point = Point3D::Zero();
};

namespace dlt_detail {

// Similarity moving the centroid to the origin with mean distance `target`.
template <int D>
Eigen::Matrix<double, D + 1, D + 1> NormalizingTransform(
    const std::vector<Eigen::Matrix<double, D, 1>>& pts, double target) {
  Eigen::Matrix<double, D, 1> c = Eigen::Matrix<double, D, 1>::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean = 0.0;
  for (const auto& p : pts) mean += (p - c).norm();
  mean /= static_cast<double>(pts.size());
  const double s = mean > 0.0 ? target / mean : 1.0;
  Eigen::Matrix<double, D + 1, D + 1> t = Eigen::Matrix<double, D + 1, D + 1>::Identity();
  t.template topLeftCorner<D, D>() *= s;
  t.template topRightCorner<D, 1>() = -s * c;
  return t;
}

}  // namespace dlt_detail

// Projection matrix from >= 6 correspondences by the direct linear transform
// with Hartley normalization of both point sets. Sign fixed so that the
// majority of points have positive depth.
inline ProjectionMatrix DltPose(std::span<const PointMatch> matches) {
  const std::size_t n = matches.size();
  Require(n >= 6, ErrorCode::kDegenerateConfiguration,
          "DLT needs >= 6 correspondences, got " + std::to_string(n));
  std::vector<Eigen::Vector2d> px(n);
  std::vector<Eigen::Vector3d> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    px[i] = matches[i].pixel;
    pts[i] = matches[i].point;
  }
  const Eigen::Matrix3d t2 = dlt_detail::NormalizingTransform<2>(px, std::sqrt(2.0));
  const Eigen::Matrix4d t3 = dlt_detail::NormalizingTransform<3>(pts, std::sqrt(3.0));

  // Coplanar (or collinear) 3D points leave the DLT underdetermined.
  Eigen::Matrix<double, 3, Eigen::Dynamic> centered(3, n);
  for (std::size_t i = 0; i < n; ++i) {
    centered.col(i) = t3.topLeftCorner<3, 3>() * pts[i] + t3.topRightCorner<3, 1>();
  }
  const Eigen::Vector3d spread =
      Eigen::JacobiSVD<Eigen::MatrixXd>(centered).singularValues();
  Require(spread[2] > 1e-9 * std::sqrt(static_cast<double>(n)),
          ErrorCode::kDegenerateConfiguration, "3D points are coplanar");

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector4d x = t3 * pts[i].homogeneous();
    const Eigen::Vector3d u = t2 * px[i].homogeneous();
    a.block<1, 4>(2 * i, 4) = -u.z() * x.transpose();
    a.block<1, 4>(2 * i, 8) = u.y() * x.transpose();
    a.block<1, 4>(2 * i + 1, 0) = u.z() * x.transpose();
    a.block<1, 4>(2 * i + 1, 8) = -u.x() * x.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A one-dimensional null space is required; otherwise the system is
  // rank-deficient (degenerate sample).
  Require(sv[10] > 1e-10 * sv[0], ErrorCode::kDegenerateConfiguration,
          "DLT system is rank deficient");
  const Eigen::VectorXd h = svd.matrixV().col(11);
  ProjectionMatrix p_norm;
  p_norm << h.segment<4>(0).transpose(), h.segment<4>(4).transpose(),
      h.segment<4>(8).transpose();
  ProjectionMatrix p = t2.inverse() * p_norm * t3;
  p /= p.norm();

  int positive = 0;
  for (const auto& x : pts) positive += (p.row(2).dot(x.homogeneous()) > 0.0) ? 1 : -1;
  if (positive < 0) p = -p;
  return p;
}

struct DecomposedCamera {
  CameraIntrinsics intrinsics;
  CameraPose pose;
};

// P ~ K [R | t] with K upper triangular, positive diagonal, K(2,2) = 1, and
// det(R) = +1.
inline DecomposedCamera Decompose(const ProjectionMatrix& projection,
                                  int image_width = 900, int image_height = 600) {
  ProjectionMatrix p = projection;
  Eigen::Matrix3d m = p.leftCols<3>();
  const double scale = m.norm();
  Require(scale > 0.0 && std::isfinite(scale) &&
              std::abs(m.determinant()) > 1e-14 * scale * scale * scale,
          ErrorCode::kSingularBlock, "left 3x3 block is singular");
  if (m.determinant() < 0.0) {
    p = -p;
    m = -m;
  }
  // RQ via QR of the row-reversed transpose.
  Eigen::Matrix3d flip = Eigen::Matrix3d::Zero();
  flip(0, 2) = flip(1, 1) = flip(2, 0) = 1.0;
  Eigen::HouseholderQR<Eigen::Matrix3d> qr((flip * m).transpose());
  const Eigen::Matrix3d q = qr.householderQ();
  const Eigen::Matrix3d r_upper = qr.matrixQR().triangularView<Eigen::Upper>();
  Eigen::Matrix3d k = flip * r_upper.transpose() * flip;
  Eigen::Matrix3d rot = flip * q.transpose();
  for (int i = 0; i < 3; ++i) {
    if (k(i, i) < 0.0) {
      k.col(i) = -k.col(i);
      rot.row(i) = -rot.row(i);
    }
  }
  const Eigen::Vector3d t = k.triangularView<Eigen::Upper>().solve(
      Eigen::Vector3d(p.col(3)));
  k /= k(2, 2);
  DecomposedCamera out;
  out.intrinsics = CameraIntrinsics::FromMatrix(k, image_width, image_height);
  out.pose = CameraPose(NearestRotation(rot), t);
  return out;
}

inline ProjectionMatrix Compose(const CameraIntrinsics& intr, const CameraPose& pose) {
  return intr.Matrix() * pose.Matrix();
}

struct RansacParams {
  double inlier_threshold = 4.0;
  int max_iterations = 1000;
  double confidence = 0.99;
  std::uint64_t seed = 1;

  void Validate() const {
    Require(inlier_threshold > 0.0, ErrorCode::kInvalidArgument,
            "inlier threshold must be positive");
    Require(max_iterations >= 1, ErrorCode::kInvalidArgument,
            "max iterations must be >= 1");
    Require(confidence > 0.0 && confidence < 1.0, ErrorCode::kInvalidArgument,
            "confidence must be in (0, 1)");
  }
};

struct PoseEstimate {
  CameraPose pose;
  CameraIntrinsics intrinsics;
  // Indices into the correspondence list.
  std::vector<std::uint32_t> inliers;
  std::size_t num_correspondences = 0;
  std::size_t num_inliers = 0;
  double mean_reprojection_error = 0.0;
  int iterations = 0;

  Point3D Center() const { return pose.Center(); }
};

namespace pose_detail {

inline constexpr std::uint64_t kRansacStream = 0x52414e53ULL;

struct Support {
  std::vector<std::uint32_t> inliers;
  double error_sum = 0.0;

  double mean() const {
    return inliers.empty() ? std::numeric_limits<double>::infinity()
                           : error_sum / inliers.size();
  }
  bool BetterThan(const Support& o) const {
    if (inliers.size() != o.inliers.size()) return inliers.size() > o.inliers.size();
    return mean() < o.mean();
  }
};

inline Support Evaluate(const CameraPose& pose, const CameraIntrinsics& intr,
                        std::span<const PointMatch> matches, double threshold) {
  Support s;
  for (std::uint32_t i = 0; i < matches.size(); ++i) {
    const auto px = TryProject(pose, intr, matches[i].point);
    if (!px) continue;
    const double e = (*px - matches[i].pixel).norm();
    if (e <= threshold) {
      s.inliers.push_back(i);
      s.error_sum += e;
    }
  }
  return s;
}

inline std::size_t RequiredIterations(std::size_t inliers, std::size_t total,
                                      double confidence) {
  const double w = static_cast<double>(inliers) / static_cast<double>(total);
  const double p_good = std::pow(w, 6);
  if (p_good >= 1.0) return 1;
  if (p_good <= 0.0) return std::numeric_limits<std::size_t>::max();
  const double n = std::log(1.0 - confidence) / std::log(1.0 - p_good);
  return n >= 1e18 ? std::numeric_limits<std::size_t>::max()
                   : static_cast<std::size_t>(std::ceil(n));
}

inline std::optional<DecomposedCamera> TryFit(std::span<const PointMatch> matches,
                                              const CameraIntrinsics& size_from) {
  try {
    return Decompose(DltPose(matches), size_from.image_width, size_from.image_height);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kDegenerateConfiguration ||
        e.code() == ErrorCode::kSingularBlock ||
        e.code() == ErrorCode::kInvalidArgument) {
      return std::nullopt;
    }
    throw;
  }
}

}  // namespace pose_detail

// RANSAC over 6-point DLT hypotheses. Inliers are counted by reprojection
// error under the decomposed camera; the best support (count, then mean
// error) is refit on all of its inliers. Hypothesis i samples from a
// counter-derived stream, so the winner matches any evaluation order.
inline PoseEstimate RansacPose(std::span<const PointMatch> matches,
                               const RansacParams& params,
                               const CameraIntrinsics& image_size = {}) {
  params.Validate();
  const std::size_t n = matches.size();
  Require(n >= 6, ErrorCode::kInvalidArgument,
          "RANSAC needs >= 6 correspondences, got " + std::to_string(n));

  std::optional<DecomposedCamera> best_cam;
  pose_detail::Support best;
  std::size_t needed = static_cast<std::size_t>(params.max_iterations);
  int iter = 0;
  std::array<PointMatch, 6> sample;
  for (; static_cast<std::size_t>(iter) < needed && iter < params.max_iterations; ++iter) {
    Rng rng = MakeRng(params.seed, pose_detail::kRansacStream, static_cast<std::uint64_t>(iter));
    std::array<std::size_t, 6> ids{};
    for (std::size_t k = 0; k < 6; ++k) {
      bool fresh;
      do {
        ids[k] = UniformIndex(rng, n);
        fresh = std::find(ids.begin(), ids.begin() + k, ids[k]) == ids.begin() + k;
      } while (!fresh);
      sample[k] = matches[ids[k]];
    }
    const auto cam = pose_detail::TryFit(sample, image_size);
    if (!cam) continue;
    auto support = pose_detail::Evaluate(cam->pose, cam->intrinsics, matches,
                                         params.inlier_threshold);
    if (!best_cam || support.BetterThan(best)) {
      best_cam = cam;
      best = std::move(support);
      needed = std::min<std::size_t>(
          needed, pose_detail::RequiredIterations(best.inliers.size(), n, params.confidence));
    }
  }
  if (!best_cam || best.inliers.size() < 6) {
    Fail(ErrorCode::kNoModelFound, "no hypothesis with >= 6 inliers");
  }

  std::vector<PointMatch> inlier_matches;
  for (auto i : best.inliers) inlier_matches.push_back(matches[i]);
  if (const auto refit = pose_detail::TryFit(inlier_matches, image_size)) {
    auto support = pose_detail::Evaluate(refit->pose, refit->intrinsics, matches,
                                         params.inlier_threshold);
    if (support.inliers.size() >= best.inliers.size()) {
      best_cam = refit;
      best = std::move(support);
    }
  }

  PoseEstimate est;
  est.pose = best_cam->pose;
  est.intrinsics = best_cam->intrinsics;
  est.num_correspondences = n;
  est.num_inliers = best.inliers.size();
  est.mean_reprojection_error = best.mean();
  est.inliers = std::move(best.inliers);
  est.iterations = iter;
  return est;
}

struct RefineParams {
  int max_iterations = 50;
  double relative_tolerance = 1e-10;
  // Inlier threshold applied when re-certifying after refinement.
  double inlier_threshold = 4.0;
};

namespace pose_detail {

inline double SquaredCost(const CameraPose& pose, const CameraIntrinsics& intr,
                          std::span<const PointMatch> pts) {
  double c = 0.0;
  for (const auto& m : pts) {
    const auto px = TryProject(pose, intr, m.point);
    if (!px) return std::numeric_limits<double>::infinity();
    c += (*px - m.pixel).squaredNorm();
  }
  return c;
}

inline double MeanError(const CameraPose& pose, const CameraIntrinsics& intr,
                        std::span<const PointMatch> pts) {
  double c = 0.0;
  for (const auto& m : pts) {
    const auto px = TryProject(pose, intr, m.point);
    if (!px) return std::numeric_limits<double>::infinity();
    c += (*px - m.pixel).norm();
  }
  return pts.empty() ? 0.0 : c / pts.size();
}

}  // namespace pose_detail

// Levenberg-Marquardt over the pose only (rotation as a left-multiplied
// exponential-map increment, free translation). Steps are accepted only when
// the squared reprojection cost decreases; the input is returned unchanged if
// the mean reprojection error would not improve.
inline PoseEstimate RefinePose(const PoseEstimate& estimate,
                               std::span<const PointMatch> matches,
                               const RefineParams& params = {},
                               std::optional<CameraIntrinsics> intrinsics = std::nullopt) {
  const CameraIntrinsics intr = intrinsics.value_or(estimate.intrinsics);
  std::vector<PointMatch> pts;
  for (auto i : estimate.inliers) {
    Require(i < matches.size(), ErrorCode::kInvalidArgument, "inlier index out of range");
    pts.push_back(matches[i]);
  }
  if (pts.size() < 6) return estimate;

  Eigen::Matrix3d rot = estimate.pose.rotation();
  Eigen::Vector3d trans = estimate.pose.translation();
  double cost = pose_detail::SquaredCost(estimate.pose, intr, pts);
  const double initial_cost = cost;
  double lambda = 1e-3;
  const std::size_t m = pts.size();
  Eigen::MatrixXd jac(2 * m, 6);
  Eigen::VectorXd res(2 * m);
  for (int it = 0; it < params.max_iterations && cost > 0.0 && std::isfinite(cost); ++it) {
    for (std::size_t i = 0; i < m; ++i) {
      const Eigen::Vector3d rx = rot * pts[i].point;
      const Eigen::Vector3d xc = rx + trans;
      const double iz = 1.0 / xc.z();
      const double u = xc.x() * iz;
      const double v = xc.y() * iz;
      res[2 * i] = intr.focal_x * u + intr.skew * v + intr.principal_x - pts[i].pixel.x();
      res[2 * i + 1] = intr.focal_y * v + intr.principal_y - pts[i].pixel.y();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << intr.focal_x * iz, intr.skew * iz,
          -(intr.focal_x * u + intr.skew * v) * iz, 0.0, intr.focal_y * iz,
          -intr.focal_y * v * iz;
      jac.block<2, 3>(2 * i, 0) = dproj * (-Hat(rx));
      jac.block<2, 3>(2 * i, 3) = dproj;
    }
    const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 6, 1> jtr = jac.transpose() * res;
    bool improved = false;
    double new_cost = cost;
    while (lambda < 1e16) {
      Eigen::Matrix<double, 6, 6> damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Matrix<double, 6, 1> delta = damped.ldlt().solve(-jtr);
      if (!delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::Matrix3d rot_new = NearestRotation(ExpRotation(delta.head<3>()) * rot);
      const Eigen::Vector3d trans_new = trans + delta.tail<3>();
      new_cost = pose_detail::SquaredCost(CameraPose(rot_new, trans_new), intr, pts);
      if (new_cost < cost) {
        rot = rot_new;
        trans = trans_new;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
    const double decrease = (cost - new_cost) / std::max(cost, 1e-300);
    cost = new_cost;
    if (decrease < params.relative_tolerance) break;
  }
  if (!(cost < initial_cost)) return estimate;

  const CameraPose refined(rot, trans);
  const double mean_before = pose_detail::MeanError(estimate.pose, intr, pts);
  const double mean_after = pose_detail::MeanError(refined, intr, pts);
  if (mean_after > mean_before) return estimate;

  PoseEstimate out = estimate;
  out.pose = refined;
  out.intrinsics = intr;
  auto support = pose_detail::Evaluate(refined, intr, matches, params.inlier_threshold);
  out.num_inliers = support.inliers.size();
  out.mean_reprojection_error = support.mean();
  out.inliers = std::move(support.inliers);
  return out;
}

enum class FailureStage : std::uint8_t { kMatching, kPoseEstimation };

constexpr std::string_view ToString(FailureStage s) {
  return s == FailureStage::kMatching ? "matching" : "pose_estimation";
}

struct RegistrationFailure {
  FailureStage stage = FailureStage::kMatching;
  std::string message;
};

struct LocalizationResult {
  std::optional<RegistrationFailure> failure;
  CameraPose pose;
  CameraIntrinsics intrinsics;
  // N_c and N_I.
  std::size_t num_correspondences = 0;
  std::size_t num_inliers = 0;
  double mean_reprojection_error = 0.0;
  double match_seconds = 0.0;
  double pose_seconds = 0.0;

  bool registered() const { return !failure.has_value(); }
  Point3D Center() const { return pose.Center(); }
};

struct LocalizeOptions {
  bool refine = true;
  // Refine with the query's calibrated intrinsics instead of the ones
  // recovered by decomposition.
  bool known_intrinsics = false;
  RefineParams refine_params;
};

// Match, then RANSAC, then refine. Failures are reported in the result with
// the stage that failed; they are not thrown.
inline LocalizationResult Localize(const QueryView& query, const MatchIndex& index,
                                   const MatchParams& match_params,
                                   const RansacParams& ransac_params,
                                   const LocalizeOptions& options = {}) {
  using Clock = std::chrono::steady_clock;
  LocalizationResult result;
  const auto t0 = Clock::now();
  std::vector<Correspondence> corr;
  try {
    corr = MatchFeatures(query, index, match_params);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kEmptyQuery) throw;
    result.failure = RegistrationFailure{FailureStage::kMatching, e.what()};
    return result;
  }
  const auto t1 = Clock::now();
  result.match_seconds = std::chrono::duration<double>(t1 - t0).count();
  result.num_correspondences = corr.size();
  if (corr.size() < 6) {
    result.failure = RegistrationFailure{
        FailureStage::kMatching, std::to_string(corr.size()) + " matches (< 6)"};
    return result;
  }
  std::vector<PointMatch> matches;
  matches.reserve(corr.size());
  for (const auto& c : corr) {
    matches.push_back({query.pixels[c.feature], index.PositionOf(c.point)});
  }
  try {
    auto est = RansacPose(matches, ransac_params, query.intrinsics);
    if (options.refine) {
      RefineParams rp = options.refine_params;
      rp.inlier_threshold = ransac_params.inlier_threshold;
      est = RefinePose(est, matches, rp,
                       options.known_intrinsics
                           ? std::optional<CameraIntrinsics>(query.intrinsics)
                           : std::nullopt);
    }
    result.pose = est.pose;
    result.intrinsics = est.intrinsics;
    result.num_inliers = est.num_inliers;
    result.mean_reprojection_error = est.mean_reprojection_error;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNoModelFound) throw;
    result.failure = RegistrationFailure{FailureStage::kPoseEstimation, e.what()};
  }
  result.pose_seconds = std::chrono::duration<double>(Clock::now() - t1).count();
  return result;
}

}  // namespace vloc
