#pragma once

// Structure-preserving model compression.
//
// Points get an initial weight equal to the share of the cloud held by their
// structure (plane, line, or the residual group). A greedy weighted set
// k-cover then repeatedly picks the point maximizing
//
//   w_i * |{ cameras j seeing i with C[j] < k }|
//
// and after every pick halves the weights of the picked point's group, zeroes
// the weights of points no longer seen by any under-covered camera, and
// renormalizes. Halving keeps the selection from piling up on a single
// structure. The unweighted set k-cover and a per-structure top-visibility
// filter are provided as baselines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vloc/error.hpp"
#include "vloc/geometry.hpp"
#include "vloc/model.hpp"
#include "vloc/structure_detect.hpp"

namespace vloc {

struct WeightAssignment {
  std::vector<double> weights;
};

// w_i = |group(i)| / N, where the residual points form one extra group.
inline WeightAssignment AssignWeights(const StructureLabeling& labeling,
                                      std::size_t num_points) {
  Require(labeling.num_points == num_points && labeling.IsPartition(),
          ErrorCode::kInvalidArgument, "labeling does not partition the model");
  WeightAssignment out;
  out.weights.assign(num_points, 0.0);
  if (num_points == 0) return out;
  const double n = static_cast<double>(num_points);
  for (const auto& s : labeling.structures) {
    const auto& members = MembersOf(s);
    const double sigma = static_cast<double>(members.size()) / n;
    for (PointId i : members) out.weights[i] = sigma;
  }
  const double sigma_rest = static_cast<double>(labeling.residual_ids.size()) / n;
  for (PointId i : labeling.residual_ids) out.weights[i] = sigma_rest;
  return out;
}

enum class CompressionMethod : std::uint8_t {
  kWeightedKCover = 0,
  kSetKCover = 1,
  kTopVisibility = 2,
  kNone = 3,
};

constexpr std::string_view ToString(CompressionMethod m) {
  switch (m) {
    case CompressionMethod::kWeightedKCover: return "weighted_kcover";
    case CompressionMethod::kSetKCover: return "set_kcover";
    case CompressionMethod::kTopVisibility: return "top_visibility";
    case CompressionMethod::kNone: return "full";
  }
  return "unknown";
}

inline std::optional<CompressionMethod> ParseCompressionMethod(std::string_view s) {
  for (auto m : {CompressionMethod::kWeightedKCover, CompressionMethod::kSetKCover,
                 CompressionMethod::kTopVisibility, CompressionMethod::kNone}) {
    if (s == ToString(m)) return m;
  }
  return std::nullopt;
}

struct CompressedModel {
  std::uint64_t source_model_id = 0;
  CompressionMethod method = CompressionMethod::kWeightedKCover;
  // k for the cover methods, the kept fraction for top_visibility.
  double parameter = 0.0;
  // In selection order.
  std::vector<PointId> selected_ids;
  // Selected points visible in each camera.
  std::vector<std::uint32_t> camera_counts;

  bool operator==(const CompressedModel&) const = default;
};

struct CoverageStats {
  std::vector<std::uint32_t> camera_counts;
  std::vector<bool> saturated;
  std::size_t num_saturated = 0;
  // Indexed like the labeling groups (structures then residual); empty when
  // no labeling was supplied.
  std::vector<std::size_t> structure_counts;
  double retained_fraction = 0.0;
};

// One greedy iteration, reported to an optional observer.
struct KCoverStep {
  std::size_t iteration = 0;
  PointId selected = 0;
  double score = 0.0;
  // Weights entering the iteration, after halving (before zeroing), and
  // after normalization. Empty for the unweighted method.
  std::vector<double> weights_before;
  std::vector<double> weights_after_halving;
  std::vector<double> weights_after;
};

using KCoverObserver = std::function<void(const KCoverStep&)>;

struct KCoverResult {
  std::vector<PointId> selected;
  std::vector<std::uint32_t> camera_counts;
  std::vector<bool> saturated;
};

namespace kcover_detail {

// Book-keeping shared by both greedy variants.
class CoverState {
 public:
  CoverState(const VisibilityMatrix& vis, int k)
      : vis_(vis),
        k_(static_cast<std::uint32_t>(k)),
        counts_(vis.num_cameras(), 0),
        unselected_visible_(vis.num_cameras()),
        open_cameras_(vis.num_points()),
        selected_(vis.num_points(), false) {
    for (CameraId j = 0; j < vis.num_cameras(); ++j) {
      unselected_visible_[j] = static_cast<std::uint32_t>(vis.PointsOf(j).size());
    }
    for (PointId i = 0; i < vis.num_points(); ++i) {
      open_cameras_[i] = static_cast<std::uint32_t>(vis.CamerasOf(i).size());
    }
    // With k == 0 nothing is under-covered.
    if (k_ == 0) std::fill(open_cameras_.begin(), open_cameras_.end(), 0);
  }

  // Every camera reached k or has no unselected visible point left.
  bool Done() const {
    for (CameraId j = 0; j < counts_.size(); ++j) {
      if (counts_[j] < k_ && unselected_visible_[j] > 0) return false;
    }
    return true;
  }

  void Select(PointId s) {
    selected_[s] = true;
    for (CameraId j : vis_.CamerasOf(s)) {
      --unselected_visible_[j];
      if (++counts_[j] == k_) {
        for (PointId i : vis_.PointsOf(j)) --open_cameras_[i];
      }
    }
  }

  // Number of under-covered cameras that see point i.
  std::uint32_t OpenCameras(PointId i) const { return open_cameras_[i]; }
  bool Selected(PointId i) const { return selected_[i]; }

  KCoverResult Finish(std::vector<PointId> selected) const {
    KCoverResult r;
    r.selected = std::move(selected);
    r.camera_counts = counts_;
    r.saturated.resize(counts_.size());
    for (CameraId j = 0; j < counts_.size(); ++j) {
      r.saturated[j] = counts_[j] < k_ && unselected_visible_[j] == 0;
    }
    return r;
  }

 private:
  const VisibilityMatrix& vis_;
  std::uint32_t k_;
  std::vector<std::uint32_t> counts_;
  std::vector<std::uint32_t> unselected_visible_;
  std::vector<std::uint32_t> open_cameras_;
  std::vector<bool> selected_;
};

}  // namespace kcover_detail

// Adaptive weighted greedy k-cover over explicit weights and groups. Points in
// the same group share halving; ties in score go to the lowest point id.
inline KCoverResult WeightedKCover(const VisibilityMatrix& vis,
                                   std::vector<double> weights,
                                   std::span<const int> groups, int k,
                                   const KCoverObserver& observer = {}) {
  const std::size_t n = vis.num_points();
  Require(k >= 1, ErrorCode::kInvalidArgument, "k must be >= 1");
  Require(n > 0 && vis.num_cameras() > 0, ErrorCode::kDegenerateModel,
          "model has no points or no cameras");
  Require(weights.size() == n && groups.size() == n, ErrorCode::kInvalidArgument,
          "weights/groups size mismatch");
  for (double w : weights) {
    Require(w >= 0.0 && std::isfinite(w), ErrorCode::kInvalidArgument,
            "weights must be finite and >= 0");
  }

  kcover_detail::CoverState state(vis, k);
  std::vector<PointId> selected;
  for (std::size_t iter = 0; !state.Done(); ++iter) {
    PointId best = 0;
    double best_score = 0.0;
    bool found = false;
    for (PointId i = 0; i < n; ++i) {
      if (state.Selected(i)) continue;
      const double score = weights[i] * state.OpenCameras(i);
      if (score > best_score) {
        best = i;
        best_score = score;
        found = true;
      }
    }
    // Only reachable if every candidate weight underflowed to zero.
    if (!found) break;

    KCoverStep step;
    if (observer) {
      step.iteration = iter;
      step.selected = best;
      step.score = best_score;
      step.weights_before = weights;
    }

    selected.push_back(best);
    state.Select(best);

    const int group = groups[best];
    for (PointId i = 0; i < n; ++i) {
      if (groups[i] == group) weights[i] /= 2.0;
    }
    if (observer) step.weights_after_halving = weights;
    for (PointId i = 0; i < n; ++i) {
      if (state.Selected(i) || state.OpenCameras(i) == 0) weights[i] = 0.0;
    }
    double total = 0.0;
    for (PointId i = 0; i < n; ++i) total += weights[i];
    if (total > 0.0) {
      for (PointId i = 0; i < n; ++i) {
        if (weights[i] != 0.0) weights[i] /= total;
      }
    }
    if (observer) {
      step.weights_after = weights;
      observer(step);
    }
  }
  return state.Finish(std::move(selected));
}

// Unweighted greedy k-cover: the point seeing the most under-covered cameras,
// ties to the lowest point id.
inline KCoverResult SetKCover(const VisibilityMatrix& vis, int k,
                              const KCoverObserver& observer = {}) {
  const std::size_t n = vis.num_points();
  Require(k >= 1, ErrorCode::kInvalidArgument, "k must be >= 1");
  Require(n > 0 && vis.num_cameras() > 0, ErrorCode::kDegenerateModel,
          "model has no points or no cameras");
  kcover_detail::CoverState state(vis, k);
  std::vector<PointId> selected;
  for (std::size_t iter = 0; !state.Done(); ++iter) {
    PointId best = 0;
    std::uint32_t best_score = 0;
    for (PointId i = 0; i < n; ++i) {
      if (state.Selected(i)) continue;
      if (state.OpenCameras(i) > best_score) {
        best = i;
        best_score = state.OpenCameras(i);
      }
    }
    if (best_score == 0) break;
    selected.push_back(best);
    state.Select(best);
    if (observer) {
      KCoverStep step;
      step.iteration = iter;
      step.selected = best;
      step.score = best_score;
      observer(step);
    }
  }
  return state.Finish(std::move(selected));
}

inline CompressedModel CompressWeightedKCover(const PointCloudModel& model,
                                              const StructureLabeling& labeling,
                                              int k,
                                              const KCoverObserver& observer = {}) {
  Require(model.num_points() > 0 && model.num_cameras() > 0,
          ErrorCode::kDegenerateModel, "model has no points or no cameras");
  const auto weights = AssignWeights(labeling, model.num_points());
  const auto groups = labeling.GroupOfPoints();
  auto result = WeightedKCover(model.visibility, weights.weights, groups, k, observer);
  CompressedModel out;
  out.source_model_id = model.model_id;
  out.method = CompressionMethod::kWeightedKCover;
  out.parameter = k;
  out.selected_ids = std::move(result.selected);
  out.camera_counts = std::move(result.camera_counts);
  return out;
}

inline CompressedModel CompressSetKCover(const PointCloudModel& model, int k,
                                         const KCoverObserver& observer = {}) {
  Require(model.num_points() > 0 && model.num_cameras() > 0,
          ErrorCode::kDegenerateModel, "model has no points or no cameras");
  auto result = SetKCover(model.visibility, k, observer);
  CompressedModel out;
  out.source_model_id = model.model_id;
  out.method = CompressionMethod::kSetKCover;
  out.parameter = k;
  out.selected_ids = std::move(result.selected);
  out.camera_counts = std::move(result.camera_counts);
  return out;
}

inline std::vector<std::uint32_t> CameraCounts(const VisibilityMatrix& vis,
                                               std::span<const PointId> ids) {
  std::vector<std::uint32_t> counts(vis.num_cameras(), 0);
  for (PointId i : ids) {
    for (CameraId j : vis.CamerasOf(i)) ++counts[j];
  }
  return counts;
}

// Keeps ceil(fraction * |group|) most-visible points of every structure and
// of the residual group; ties to the lowest id.
inline CompressedModel CompressTopVisibility(const PointCloudModel& model,
                                             const StructureLabeling& labeling,
                                             double fraction) {
  Require(fraction > 0.0 && fraction <= 1.0, ErrorCode::kInvalidArgument,
          "fraction must be in (0, 1]");
  Require(labeling.num_points == model.num_points() && labeling.IsPartition(),
          ErrorCode::kInvalidArgument, "labeling does not partition the model");
  CompressedModel out;
  out.source_model_id = model.model_id;
  out.method = CompressionMethod::kTopVisibility;
  out.parameter = fraction;
  auto keep_top = [&](std::vector<PointId> group) {
    std::stable_sort(group.begin(), group.end(), [&](PointId a, PointId b) {
      const auto va = model.visibility.CamerasOf(a).size();
      const auto vb = model.visibility.CamerasOf(b).size();
      return va != vb ? va > vb : a < b;
    });
    const auto keep = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(group.size()) - 1e-12));
    out.selected_ids.insert(out.selected_ids.end(), group.begin(),
                            group.begin() + std::min(keep, group.size()));
  };
  for (const auto& s : labeling.structures) keep_top(MembersOf(s));
  keep_top(labeling.residual_ids);
  out.camera_counts = CameraCounts(model.visibility, out.selected_ids);
  return out;
}

// Exact per-camera counts of `compressed` against its source model. A camera
// is saturated when it is below k and every point it sees is selected.
inline CoverageStats CoverageReport(const PointCloudModel& model,
                                    const CompressedModel& compressed, int k,
                                    const StructureLabeling* labeling = nullptr) {
  CoverageStats stats;
  std::vector<bool> chosen(model.num_points(), false);
  for (PointId i : compressed.selected_ids) {
    Require(i < model.num_points(), ErrorCode::kInvalidArgument,
            "compressed model references unknown point");
    chosen[i] = true;
  }
  stats.camera_counts = CameraCounts(model.visibility, compressed.selected_ids);
  stats.saturated.assign(model.num_cameras(), false);
  for (CameraId j = 0; j < model.num_cameras(); ++j) {
    if (stats.camera_counts[j] >= static_cast<std::uint32_t>(k)) continue;
    const auto pts = model.visibility.PointsOf(j);
    if (std::all_of(pts.begin(), pts.end(), [&](PointId i) { return chosen[i]; })) {
      stats.saturated[j] = true;
      ++stats.num_saturated;
    }
  }
  if (labeling != nullptr) {
    const auto groups = labeling->GroupOfPoints();
    stats.structure_counts.assign(labeling->num_groups(), 0);
    for (PointId i : compressed.selected_ids) ++stats.structure_counts[groups[i]];
  }
  stats.retained_fraction =
      model.num_points() == 0
          ? 0.0
          : static_cast<double>(compressed.selected_ids.size()) / model.num_points();
  return stats;
}

// The compressed point cloud: selected points in selection order with their
// descriptor lists unchanged.
inline PointCloudModel Materialize(const PointCloudModel& model,
                                   const CompressedModel& compressed) {
  return model.Subset(compressed.selected_ids);
}

}  // namespace vloc
