#pragma once

// Sequential RANSAC detection of planes, then lines, in a point cloud. Each
// accepted structure removes its members before the next round; whatever is
// left over forms the residual category.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "vloc/error.hpp"
#include "vloc/geometry.hpp"
#include "vloc/random.hpp"

namespace vloc {

// Points x with normal . x == offset.
struct PlaneStructure {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;
  std::vector<PointId> member_ids;

  double Distance(const Point3D& p) const {
    return std::abs(normal.dot(p) - offset);
  }

  bool operator==(const PlaneStructure&) const = default;
};

struct LineStructure {
  Point3D anchor = Point3D::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitX();
  std::vector<PointId> member_ids;

  double Distance(const Point3D& p) const {
    const Eigen::Vector3d d = p - anchor;
    return (d - d.dot(direction) * direction).norm();
  }

  bool operator==(const LineStructure&) const = default;
};

using Structure = std::variant<PlaneStructure, LineStructure>;

inline const std::vector<PointId>& MembersOf(const Structure& s) {
  return std::visit(
      [](const auto& v) -> const std::vector<PointId>& { return v.member_ids; },
      s);
}

inline bool IsPlane(const Structure& s) {
  return std::holds_alternative<PlaneStructure>(s);
}

// Structures r_1..r_L plus the residual category L+1.
struct StructureLabeling {
  std::size_t num_points = 0;
  std::vector<Structure> structures;
  std::vector<PointId> residual_ids;

  bool operator==(const StructureLabeling&) const = default;

  std::size_t num_groups() const { return structures.size() + 1; }
  int residual_group() const { return static_cast<int>(structures.size()); }

  // Group index of every point: l for structure l, L for the residual.
  std::vector<int> GroupOfPoints() const {
    std::vector<int> group(num_points, -1);
    for (std::size_t l = 0; l < structures.size(); ++l) {
      for (PointId i : MembersOf(structures[l])) group[i] = static_cast<int>(l);
    }
    for (PointId i : residual_ids) group[i] = residual_group();
    return group;
  }

  // Each point in exactly one group.
  bool IsPartition() const {
    std::vector<int> seen(num_points, 0);
    auto mark = [&](PointId i) {
      if (i >= num_points) return false;
      return ++seen[i] == 1;
    };
    for (const auto& s : structures) {
      for (PointId i : MembersOf(s)) {
        if (!mark(i)) return false;
      }
    }
    for (PointId i : residual_ids) {
      if (!mark(i)) return false;
    }
    return std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
  }

  // Labeling with every point in the residual group.
  static StructureLabeling AllResidual(std::size_t n) {
    StructureLabeling labeling;
    labeling.num_points = n;
    labeling.residual_ids.resize(n);
    for (PointId i = 0; i < n; ++i) labeling.residual_ids[i] = i;
    return labeling;
  }
};

struct DetectParams {
  double inlier_threshold = 0.05;
  // Unset: max(20, 1% of the input size).
  std::optional<int> min_members;
  int max_iterations_per_structure = 1000;
  int max_structures = 64;
  std::uint64_t seed = 1;

  int MinMembersFor(std::size_t n) const {
    if (min_members) return *min_members;
    return std::max(20, static_cast<int>(std::ceil(0.01 * n)));
  }
};

// Per accepted structure: which hypothesis won and the best consensus seen.
struct DetectionRound {
  bool plane = true;
  int hypothesis_index = -1;
  std::size_t consensus = 0;
  std::size_t max_sampled_consensus = 0;
  int hypotheses_sampled = 0;
  int degenerate_samples = 0;
};

namespace detect_detail {

inline constexpr std::uint64_t kPlaneStream = 0x504c414e45ULL;
inline constexpr std::uint64_t kLineStream = 0x4c494e45ULL;

// N distinct positions in [0, pool), by rejection.
template <std::size_t N>
std::array<std::size_t, N> SampleDistinct(Rng& rng, std::size_t pool) {
  std::array<std::size_t, N> out{};
  for (std::size_t k = 0; k < N; ++k) {
    bool fresh;
    do {
      out[k] = UniformIndex(rng, pool);
      fresh = std::find(out.begin(), out.begin() + k, out[k]) == out.begin() + k;
    } while (!fresh);
  }
  return out;
}

inline std::optional<PlaneStructure> PlaneThrough(const Point3D& a,
                                                  const Point3D& b,
                                                  const Point3D& c) {
  const Eigen::Vector3d ab = b - a;
  const Eigen::Vector3d ac = c - a;
  const Eigen::Vector3d n = ab.cross(ac);
  const double scale = ab.norm() * ac.norm();
  if (!(scale > 0.0) || n.norm() <= 1e-9 * scale) return std::nullopt;
  PlaneStructure plane;
  plane.normal = n.normalized();
  plane.offset = plane.normal.dot(a);
  return plane;
}

inline std::optional<LineStructure> LineThrough(const Point3D& a,
                                                const Point3D& b) {
  const Eigen::Vector3d d = b - a;
  if (d.norm() <= 1e-12) return std::nullopt;
  LineStructure line;
  line.anchor = a;
  line.direction = d.normalized();
  return line;
}

// Centroid and covariance eigen-decomposition of the member points.
inline std::pair<Point3D, Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>>
MemberSpread(std::span<const Point3D> points, std::span<const PointId> ids) {
  Point3D centroid = Point3D::Zero();
  for (PointId i : ids) centroid += points[i];
  centroid /= static_cast<double>(ids.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (PointId i : ids) {
    const Eigen::Vector3d d = points[i] - centroid;
    cov += d * d.transpose();
  }
  return {centroid, Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(cov)};
}

template <typename Model>
std::vector<PointId> Inliers(const Model& model, std::span<const Point3D> points,
                             std::span<const PointId> ids, double threshold) {
  std::vector<PointId> out;
  for (PointId i : ids) {
    if (model.Distance(points[i]) <= threshold) out.push_back(i);
  }
  return out;
}

template <typename Model>
double MaxDistance(const Model& model, std::span<const Point3D> points,
                   std::span<const PointId> ids) {
  double m = 0.0;
  for (PointId i : ids) m = std::max(m, model.Distance(points[i]));
  return m;
}

// Least-squares refit over the members; kept only when every member stays
// within the threshold so membership is unchanged.
inline void RefitPlane(PlaneStructure& plane, std::span<const Point3D> points,
                       double threshold) {
  if (plane.member_ids.size() < 3) return;
  const auto [centroid, eig] = MemberSpread(points, plane.member_ids);
  PlaneStructure fit;
  fit.normal = eig.eigenvectors().col(0).normalized();
  fit.offset = fit.normal.dot(centroid);
  if (MaxDistance(fit, points, plane.member_ids) <= threshold) {
    plane.normal = fit.normal;
    plane.offset = fit.offset;
  }
}

inline void RefitLine(LineStructure& line, std::span<const Point3D> points,
                      double threshold) {
  if (line.member_ids.size() < 2) return;
  const auto [centroid, eig] = MemberSpread(points, line.member_ids);
  LineStructure fit;
  fit.anchor = centroid;
  fit.direction = eig.eigenvectors().col(2).normalized();
  if (MaxDistance(fit, points, line.member_ids) <= threshold) {
    line.anchor = fit.anchor;
    line.direction = fit.direction;
  }
}

struct RoundResult {
  std::optional<Structure> structure;
  DetectionRound trace;
};

// One RANSAC round: best-of-N hypotheses, winner by (consensus, lowest
// hypothesis index). Hypothesis h draws from its own counter-derived stream.
template <bool kPlane>
RoundResult BestHypothesis(std::span<const Point3D> points,
                           std::span<const PointId> remaining,
                           const DetectParams& params, std::uint64_t round) {
  RoundResult result;
  result.trace.plane = kPlane;
  constexpr std::size_t kSample = kPlane ? 3 : 2;
  if (remaining.size() < kSample) return result;
  const std::uint64_t stream = kPlane ? kPlaneStream : kLineStream;
  std::optional<Structure> best;
  std::size_t best_count = 0;
  for (int h = 0; h < params.max_iterations_per_structure; ++h) {
    Rng rng = MakeRng(params.seed, stream + round, static_cast<std::uint64_t>(h));
    const auto s = SampleDistinct<kSample>(rng, remaining.size());
    ++result.trace.hypotheses_sampled;
    std::optional<Structure> hyp;
    if constexpr (kPlane) {
      auto p = PlaneThrough(points[remaining[s[0]]], points[remaining[s[1]]],
                            points[remaining[s[2]]]);
      if (p) hyp = *p;
    } else {
      auto l = LineThrough(points[remaining[s[0]]], points[remaining[s[1]]]);
      if (l) hyp = *l;
    }
    if (!hyp) {
      ++result.trace.degenerate_samples;
      continue;
    }
    std::size_t count = 0;
    std::visit(
        [&](const auto& m) {
          for (PointId i : remaining) {
            count += m.Distance(points[i]) <= params.inlier_threshold ? 1 : 0;
          }
        },
        *hyp);
    result.trace.max_sampled_consensus =
        std::max(result.trace.max_sampled_consensus, count);
    if (!best || count > best_count) {
      best = std::move(hyp);
      best_count = count;
      result.trace.hypothesis_index = h;
    }
  }
  result.trace.consensus = best_count;
  result.structure = std::move(best);
  return result;
}

inline std::vector<PointId> RemoveIds(std::span<const PointId> from,
                                      std::span<const PointId> sorted_remove) {
  std::vector<PointId> out;
  out.reserve(from.size());
  for (PointId i : from) {
    if (!std::binary_search(sorted_remove.begin(), sorted_remove.end(), i)) {
      out.push_back(i);
    }
  }
  return out;
}

template <bool kPlane>
std::vector<Structure> DetectSequential(std::span<const Point3D> points,
                                        std::vector<PointId> remaining,
                                        const DetectParams& params,
                                        std::uint64_t round_base,
                                        std::vector<DetectionRound>* trace) {
  Require(params.inlier_threshold > 0.0, ErrorCode::kInvalidArgument,
          "inlier threshold must be positive");
  const int min_members = params.MinMembersFor(remaining.size());
  Require(min_members >= (kPlane ? 3 : 2), ErrorCode::kInvalidArgument,
          "min_members must be >= 3 for planes and >= 2 for lines");
  std::sort(remaining.begin(), remaining.end());
  std::vector<Structure> found;
  // Points whose plane support was line-like; they stay available for lines.
  std::vector<PointId> excluded;
  std::uint64_t round = round_base;
  while (static_cast<int>(found.size()) < params.max_structures) {
    RoundResult r = BestHypothesis<kPlane>(points, remaining, params, round++);
    if (!r.structure || static_cast<int>(r.trace.consensus) < min_members) break;
    auto members = std::visit(
        [&](const auto& m) {
          return Inliers(m, points, remaining, params.inlier_threshold);
        },
        *r.structure);
    if constexpr (kPlane) {
      // A plane through a line plus a few stray points is not a plane: if
      // the best line inside the support is itself large enough to be a
      // structure and leaves fewer than min_members, set the line aside for
      // line detection and try again.
      DetectParams inner = params;
      inner.min_members = 2;
      inner.max_iterations_per_structure =
          std::min(params.max_iterations_per_structure, 300);
      RoundResult line = BestHypothesis<false>(points, members, inner, round + 0x10000);
      if (line.structure &&
          static_cast<int>(line.trace.consensus) >= min_members &&
          static_cast<int>(members.size() - line.trace.consensus) < min_members) {
        auto line_members = Inliers(std::get<LineStructure>(*line.structure),
                                    points, members, params.inlier_threshold);
        excluded.insert(excluded.end(), line_members.begin(), line_members.end());
        remaining = RemoveIds(remaining, line_members);
        continue;
      }
    }
    std::visit(
        [&](auto& m) {
          m.member_ids = members;
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, PlaneStructure>) {
            RefitPlane(m, points, params.inlier_threshold);
          } else {
            RefitLine(m, points, params.inlier_threshold);
          }
        },
        *r.structure);
    remaining = RemoveIds(remaining, members);
    if (trace != nullptr) trace->push_back(r.trace);
    found.push_back(std::move(*r.structure));
  }
  return found;
}

}  // namespace detect_detail

inline std::vector<PlaneStructure> DetectPlanes(
    std::span<const Point3D> points, std::vector<PointId> ids,
    const DetectParams& params, std::vector<DetectionRound>* trace = nullptr) {
  std::vector<PlaneStructure> out;
  for (auto& s : detect_detail::DetectSequential<true>(points, std::move(ids),
                                                       params, 0, trace)) {
    out.push_back(std::get<PlaneStructure>(std::move(s)));
  }
  return out;
}

inline std::vector<PlaneStructure> DetectPlanes(std::span<const Point3D> points,
                                                const DetectParams& params) {
  std::vector<PointId> ids(points.size());
  for (PointId i = 0; i < ids.size(); ++i) ids[i] = i;
  return DetectPlanes(points, std::move(ids), params);
}

inline std::vector<LineStructure> DetectLines(
    std::span<const Point3D> points, std::vector<PointId> ids,
    const DetectParams& params, std::vector<DetectionRound>* trace = nullptr) {
  std::vector<LineStructure> out;
  for (auto& s : detect_detail::DetectSequential<false>(points, std::move(ids),
                                                        params, 0, trace)) {
    out.push_back(std::get<LineStructure>(std::move(s)));
  }
  return out;
}

inline std::vector<LineStructure> DetectLines(std::span<const Point3D> points,
                                              const DetectParams& params) {
  std::vector<PointId> ids(points.size());
  for (PointId i = 0; i < ids.size(); ++i) ids[i] = i;
  return DetectLines(points, std::move(ids), params);
}

// Planes first, then lines on what the planes left, then the residual.
inline StructureLabeling DetectStructures(
    std::span<const Point3D> points, const DetectParams& params,
    std::vector<DetectionRound>* trace = nullptr) {
  Require(!points.empty(), ErrorCode::kInvalidArgument, "empty point set");
  std::vector<PointId> all(points.size());
  for (PointId i = 0; i < all.size(); ++i) all[i] = i;

  // Both stages use the threshold computed from the full cloud size.
  DetectParams fixed = params;
  fixed.min_members = params.MinMembersFor(points.size());

  StructureLabeling labeling;
  labeling.num_points = points.size();
  std::vector<PointId> claimed;
  for (auto& plane : DetectPlanes(points, all, fixed, trace)) {
    claimed.insert(claimed.end(), plane.member_ids.begin(), plane.member_ids.end());
    labeling.structures.emplace_back(std::move(plane));
  }
  std::sort(claimed.begin(), claimed.end());
  std::vector<PointId> rest = detect_detail::RemoveIds(all, claimed);

  DetectParams line_params = fixed;
  line_params.seed = DeriveSeed(params.seed, 7);
  for (auto& line : DetectLines(points, rest, line_params, trace)) {
    claimed.insert(claimed.end(), line.member_ids.begin(), line.member_ids.end());
    labeling.structures.emplace_back(std::move(line));
  }
  std::sort(claimed.begin(), claimed.end());
  labeling.residual_ids = detect_detail::RemoveIds(all, claimed);
  return labeling;
}

}  // namespace vloc
