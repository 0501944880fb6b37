#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "vloc/error.hpp"
#include "vloc/geometry.hpp"

namespace vloc {

// Column-major descriptor block, one unit-norm descriptor per column.
using DescriptorMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>;

// The positioning map: 3D points with their multi-view descriptor lists and
// per-camera visibility.
struct PointCloudModel {
  std::uint64_t model_id = 0;
  int descriptor_dim = 128;
  std::vector<Point3D> positions;
  // Descriptors of point i are columns [offsets[i], offsets[i + 1]).
  DescriptorMatrix descriptors;
  std::vector<std::uint32_t> descriptor_offsets{0};
  VisibilityMatrix visibility;

  std::size_t num_points() const { return positions.size(); }
  std::size_t num_cameras() const { return visibility.num_cameras(); }
  std::size_t num_descriptors() const {
    return static_cast<std::size_t>(descriptors.cols());
  }

  std::uint32_t NumDescriptorsOf(PointId i) const {
    return descriptor_offsets[i + 1] - descriptor_offsets[i];
  }

  auto DescriptorsOf(PointId i) const {
    return descriptors.middleCols(descriptor_offsets[i], NumDescriptorsOf(i));
  }

  void Validate() const {
    Require(descriptor_dim > 0, ErrorCode::kInvalidArgument,
            "descriptor dimension must be positive");
    Require(descriptor_offsets.size() == positions.size() + 1,
            ErrorCode::kInvalidArgument, "descriptor offsets size mismatch");
    Require(descriptor_offsets.front() == 0 &&
                descriptor_offsets.back() == descriptors.cols(),
            ErrorCode::kInvalidArgument, "descriptor offsets out of range");
    for (std::size_t i = 0; i + 1 < descriptor_offsets.size(); ++i) {
      Require(descriptor_offsets[i] <= descriptor_offsets[i + 1],
              ErrorCode::kInvalidArgument, "descriptor offsets not monotone");
    }
    Require(descriptors.rows() == descriptor_dim || descriptors.cols() == 0,
            ErrorCode::kInvalidArgument, "descriptor rows != descriptor_dim");
    Require(visibility.num_points() == positions.size(),
            ErrorCode::kInvalidArgument, "visibility rows != point count");
    Require(visibility.IsConsistent(), ErrorCode::kInvalidArgument,
            "visibility cross-index inconsistent");
    for (const auto& p : positions) {
      Require(AllFinite(p), ErrorCode::kInvalidArgument, "non-finite point");
    }
  }

  // Model restricted to `ids` (renumbered in the given order); descriptor
  // lists and visibility are carried over unchanged.
  PointCloudModel Subset(std::span<const PointId> ids) const {
    PointCloudModel out;
    out.model_id = model_id;
    out.descriptor_dim = descriptor_dim;
    out.positions.reserve(ids.size());
    std::uint32_t total = 0;
    out.descriptor_offsets.reserve(ids.size() + 1);
    for (PointId id : ids) {
      Require(id < num_points(), ErrorCode::kInvalidArgument,
              "subset id out of range");
      out.positions.push_back(positions[id]);
      total += NumDescriptorsOf(id);
      out.descriptor_offsets.push_back(total);
    }
    out.descriptors.resize(descriptor_dim, total);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      out.descriptors.middleCols(out.descriptor_offsets[k],
                                 NumDescriptorsOf(ids[k])) =
          DescriptorsOf(ids[k]);
    }
    out.visibility = visibility.Subset(ids);
    return out;
  }

  bool operator==(const PointCloudModel& o) const {
    return model_id == o.model_id && descriptor_dim == o.descriptor_dim &&
           positions == o.positions && descriptor_offsets == o.descriptor_offsets &&
           descriptors.cols() == o.descriptors.cols() &&
           (descriptors.cols() == 0 || (descriptors.rows() == o.descriptors.rows() &&
                                        descriptors == o.descriptors)) &&
           visibility == o.visibility;
  }
};

}  // namespace vloc
