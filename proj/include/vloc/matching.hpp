#pragma once

// 2D-to-3D correspondence search. Model descriptors are quantized into flat
// k-means visual words; a query feature is compared only against the model
// descriptors of its nearest word. Features are processed cheapest word
// first and the search stops once enough matches are accepted.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "vloc/error.hpp"
#include "vloc/geometry.hpp"
#include "vloc/model.hpp"
#include "vloc/random.hpp"
#include "vloc/scene_synth.hpp"

namespace vloc {

struct KMeansParams {
  int max_iterations = 10;
  // Centroids are trained on at most this many descriptors (drawn without
  // replacement); all descriptors are then assigned. 0 trains on all.
  std::size_t max_training_descriptors = 32768;
};

inline int DefaultWordCount(std::size_t num_points) {
  return std::max<int>(16, static_cast<int>(num_points / 50));
}

class MatchIndex {
 public:
  int descriptor_dim() const { return static_cast<int>(centroids_.rows()); }
  int num_words() const { return static_cast<int>(centroids_.cols()); }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t source_model_id() const { return source_model_id_; }

  const DescriptorMatrix& centroids() const { return centroids_; }
  std::size_t num_entries() const { return entry_point_.size(); }
  std::size_t num_points() const { return positions_.size(); }

  // Entries of word w are [word_offsets[w], word_offsets[w+1]).
  std::size_t WordSize(int w) const {
    return word_offsets_[w + 1] - word_offsets_[w];
  }
  std::size_t WordBegin(int w) const { return word_offsets_[w]; }
  int WordOfEntry(std::size_t e) const {
    return static_cast<int>(std::upper_bound(word_offsets_.begin(),
                                             word_offsets_.end(), e) -
                            word_offsets_.begin()) -
           1;
  }
  // Local point index of entry e (word-sorted order).
  std::uint32_t EntryPoint(std::size_t e) const { return entry_point_[e]; }
  auto EntryDescriptor(std::size_t e) const {
    return entry_descriptors_.col(static_cast<Eigen::Index>(e));
  }
  // Source model id and position of local point p.
  PointId PointIdOf(std::uint32_t p) const { return point_ids_[p]; }
  const Point3D& PositionOf(std::uint32_t p) const { return positions_[p]; }

  // Nearest word of each descriptor column (ties to the lowest word id).
  std::vector<int> NearestWords(const DescriptorMatrix& descriptors) const {
    return NearestCentroids(centroids_, descriptors);
  }

  static std::vector<int> NearestCentroids(const DescriptorMatrix& centroids,
                                           const DescriptorMatrix& descriptors) {
    // argmin |x - c|^2 = argmax (c.x - |c|^2 / 2).
    const Eigen::VectorXf half_norms = 0.5f * centroids.colwise().squaredNorm();
    std::vector<int> out(descriptors.cols());
    constexpr Eigen::Index kChunk = 2048;
    Eigen::MatrixXf scores;
    for (Eigen::Index start = 0; start < descriptors.cols(); start += kChunk) {
      const Eigen::Index len = std::min(kChunk, descriptors.cols() - start);
      scores.noalias() = centroids.transpose() * descriptors.middleCols(start, len);
      for (Eigen::Index c = 0; c < len; ++c) {
        int best = 0;
        float best_score = -std::numeric_limits<float>::infinity();
        for (Eigen::Index w = 0; w < scores.rows(); ++w) {
          const float s = scores(w, c) - half_norms[w];
          if (s > best_score) {
            best_score = s;
            best = static_cast<int>(w);
          }
        }
        out[start + c] = best;
      }
    }
    return out;
  }

  friend MatchIndex BuildIndex(const PointCloudModel& model, int num_words,
                               std::uint64_t seed, const KMeansParams& params,
                               std::span<const PointId> source_ids);

 private:
  DescriptorMatrix centroids_;
  std::vector<std::size_t> word_offsets_;
  DescriptorMatrix entry_descriptors_;
  std::vector<std::uint32_t> entry_point_;
  std::vector<PointId> point_ids_;
  std::vector<Point3D> positions_;
  std::uint64_t seed_ = 0;
  std::uint64_t source_model_id_ = 0;
};

// Flat k-means vocabulary over all model descriptors, seeded with distinct
// random descriptors; every descriptor is filed under its nearest centroid.
// `source_ids`, when given, maps local points back to an original model
// (e.g. the ids kept by compression).
inline MatchIndex BuildIndex(const PointCloudModel& model, int num_words,
                             std::uint64_t seed, const KMeansParams& params = {},
                             std::span<const PointId> source_ids = {}) {
  Require(source_ids.empty() || source_ids.size() == model.num_points(),
          ErrorCode::kInvalidArgument, "source id count differs from model");
  Require(num_words >= 1, ErrorCode::kInvalidArgument, "word count must be >= 1");
  const std::size_t total = model.num_descriptors();
  Require(total >= static_cast<std::size_t>(num_words),
          ErrorCode::kTooFewDescriptors,
          std::to_string(total) + " descriptors for " + std::to_string(num_words) +
              " words");
  const int dim = model.descriptor_dim;
  Rng rng = MakeRng(seed, 41);

  // Random permutation prefix: initial centroids, then the training set.
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t train_size =
      params.max_training_descriptors == 0
          ? total
          : std::max<std::size_t>(num_words,
                                  std::min(total, params.max_training_descriptors));
  for (std::size_t k = 0; k < train_size; ++k) {
    std::swap(order[k], order[k + UniformIndex(rng, total - k)]);
  }
  std::sort(order.begin() + num_words, order.begin() + train_size);

  DescriptorMatrix centroids(dim, num_words);
  for (int w = 0; w < num_words; ++w) centroids.col(w) = model.descriptors.col(order[w]);

  DescriptorMatrix train(dim, train_size);
  std::vector<std::size_t> train_ids(order.begin(), order.begin() + train_size);
  std::sort(train_ids.begin(), train_ids.end());
  for (std::size_t k = 0; k < train_size; ++k) {
    train.col(k) = model.descriptors.col(train_ids[k]);
  }

  std::vector<int> assign(train_size, -1);
  for (int iter = 0; iter < std::max(1, params.max_iterations); ++iter) {
    const auto next = MatchIndex::NearestCentroids(centroids, train);
    const bool changed = next != assign;
    assign = next;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(dim, num_words);
    std::vector<std::size_t> counts(num_words, 0);
    for (std::size_t k = 0; k < train_size; ++k) {
      sums.col(assign[k]) += train.col(k).cast<double>();
      ++counts[assign[k]];
    }
    for (int w = 0; w < num_words; ++w) {
      const double n = sums.col(w).norm();
      // Empty or cancelling clusters keep their previous centroid.
      if (counts[w] > 0 && n > 1e-12) centroids.col(w) = (sums.col(w) / n).cast<float>();
    }
    if (!changed) break;
  }

  MatchIndex index;
  index.seed_ = seed;
  index.source_model_id_ = model.model_id;
  index.centroids_ = std::move(centroids);
  index.positions_ = model.positions;
  if (source_ids.empty()) {
    index.point_ids_.resize(model.num_points());
    std::iota(index.point_ids_.begin(), index.point_ids_.end(), 0);
  } else {
    index.point_ids_.assign(source_ids.begin(), source_ids.end());
  }

  const auto words = MatchIndex::NearestCentroids(index.centroids_, model.descriptors);
  std::vector<std::uint32_t> point_of_desc(total);
  for (PointId i = 0; i < model.num_points(); ++i) {
    for (auto c = model.descriptor_offsets[i]; c < model.descriptor_offsets[i + 1]; ++c) {
      point_of_desc[c] = i;
    }
  }
  index.word_offsets_.assign(num_words + 1, 0);
  for (int w : words) ++index.word_offsets_[w + 1];
  std::partial_sum(index.word_offsets_.begin(), index.word_offsets_.end(),
                   index.word_offsets_.begin());
  std::vector<std::size_t> cursor(index.word_offsets_.begin(),
                                  index.word_offsets_.end() - 1);
  index.entry_descriptors_.resize(dim, total);
  index.entry_point_.resize(total);
  for (std::size_t c = 0; c < total; ++c) {
    const std::size_t e = cursor[words[c]]++;
    index.entry_descriptors_.col(e) = model.descriptors.col(c);
    index.entry_point_[e] = point_of_desc[c];
  }
  return index;
}

struct MatchParams {
  double ratio_threshold = 0.7;
  // Early-stop after this many accepted correspondences.
  std::size_t max_matches = 200;
  // Brute-force nearest neighbors over all model descriptors.
  bool exact_mode = false;

  static constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

  void Validate() const {
    Require(ratio_threshold > 0.0 && ratio_threshold < 1.0,
            ErrorCode::kInvalidArgument, "ratio threshold must be in (0, 1)");
    Require(max_matches >= 6, ErrorCode::kInvalidArgument, "max_matches must be >= 6");
  }
};

struct Correspondence {
  std::uint32_t feature = 0;
  // Local point index in the match index.
  std::uint32_t point = 0;
  PointId point_id = 0;
  float distance = 0.0f;
  float ratio = 0.0f;
};

namespace match_detail {

struct Neighbor {
  std::uint32_t point = std::numeric_limits<std::uint32_t>::max();
  float sq_distance = std::numeric_limits<float>::infinity();
  bool valid() const { return point != std::numeric_limits<std::uint32_t>::max(); }
};

// Nearest and second-nearest model descriptors that belong to different
// 3D points.
struct TwoNearest {
  Neighbor first;
  Neighbor second;

  void Offer(std::uint32_t point, float d) {
    if (point == first.point) {
      first.sq_distance = std::min(first.sq_distance, d);
    } else if (d < first.sq_distance) {
      second = first;
      first = {point, d};
    } else if (point == second.point) {
      second.sq_distance = std::min(second.sq_distance, d);
    } else if (d < second.sq_distance) {
      second = {point, d};
    }
  }
};

}  // namespace match_detail

// Ratio-test matching of query features against the index. At most one
// correspondence per 3D point (the closest wins); output is in acceptance
// order and holds at most params.max_matches entries.
inline std::vector<Correspondence> MatchFeatures(const DescriptorMatrix& query,
                                                 const MatchIndex& index,
                                                 const MatchParams& params) {
  params.Validate();
  Require(query.cols() > 0, ErrorCode::kEmptyQuery, "query has no features");
  Require(query.rows() == index.descriptor_dim(), ErrorCode::kInvalidArgument,
          "query descriptor dimension differs from the index");

  const auto num_features = static_cast<std::size_t>(query.cols());
  std::vector<int> words;
  std::vector<std::uint32_t> order(num_features);
  std::iota(order.begin(), order.end(), 0);
  if (!params.exact_mode) {
    words = index.NearestWords(query);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      return index.WordSize(words[a]) < index.WordSize(words[b]);
    });
  }

  std::vector<Correspondence> out;
  // Position in `out` of the correspondence holding each local point.
  std::vector<std::int32_t> slot(index.num_points(), -1);
  const float ratio_sq = static_cast<float>(params.ratio_threshold * params.ratio_threshold);
  for (std::uint32_t f : order) {
    if (out.size() >= params.max_matches) break;
    std::size_t begin = 0;
    std::size_t end = index.num_entries();
    if (!params.exact_mode) {
      begin = index.WordBegin(words[f]);
      end = begin + index.WordSize(words[f]);
    }
    match_detail::TwoNearest nn;
    const auto q = query.col(f);
    for (std::size_t e = begin; e < end; ++e) {
      nn.Offer(index.EntryPoint(e), (index.EntryDescriptor(e) - q).squaredNorm());
    }
    if (!nn.first.valid() || !nn.second.valid()) continue;
    if (!(nn.first.sq_distance < ratio_sq * nn.second.sq_distance)) continue;
    const float d1 = std::sqrt(nn.first.sq_distance);
    const float d2 = std::sqrt(nn.second.sq_distance);
    Correspondence c{f, nn.first.point, index.PointIdOf(nn.first.point), d1,
                     d2 > 0.0f ? d1 / d2 : 0.0f};
    auto& s = slot[nn.first.point];
    if (s < 0) {
      s = static_cast<std::int32_t>(out.size());
      out.push_back(c);
    } else if (c.distance < out[s].distance) {
      out[s] = c;
    }
  }
  return out;
}

inline std::vector<Correspondence> MatchFeatures(const QueryView& query,
                                                 const MatchIndex& index,
                                                 const MatchParams& params) {
  return MatchFeatures(query.descriptors, index, params);
}

}  // namespace vloc
