// Generate a scene, compress its model by weighted k-cover and localize a
// few held-out views.

#include <cstdio>

#include "vloc/vloc.hpp"

int main() {
  using namespace vloc;
  SceneSpec spec;
  spec.seed = 7;
  const GroundTruthScene scene = GenerateScene(spec);
  const PointCloudModel model = BuildModel(scene, 0.01, spec.seed);

  DetectParams dp;
  dp.seed = spec.seed;
  const StructureLabeling labeling = DetectStructures(model.positions, dp);
  std::printf("%zu points, %zu structures, %zu residual\n", model.num_points(),
              labeling.structures.size(), labeling.residual_ids.size());

  const CompressedModel compressed = CompressWeightedKCover(model, labeling, 60);
  const PointCloudModel small = Materialize(model, compressed);
  std::printf("k=60 keeps %zu points (%.1f MB -> %.1f MB)\n", small.num_points(),
              SizeMegabytes(SerializedSize(model)), SizeMegabytes(SerializedSize(small)));

  const MatchIndex index = BuildIndex(small, DefaultWordCount(small.num_points()), 1);
  const auto queries = RenderQueries(scene, 5, RenderParams{1.0, 0.03, 0.2, 0.3}, 11);
  for (std::size_t v = 0; v < queries.size(); ++v) {
    RansacParams rp;
    rp.seed = v + 1;
    const LocalizationResult r = Localize(queries[v], index, MatchParams{}, rp);
    if (!r.registered()) {
      std::printf("view %zu: failed at %s\n", v, std::string(ToString(r.failure->stage)).c_str());
      continue;
    }
    std::printf("view %zu: N_c=%zu N_I=%zu verified=%d error=%.1f cm\n", v,
                r.num_correspondences, r.num_inliers, Verify(r) ? 1 : 0,
                PositionErrorCm(r, queries[v]));
  }
  return 0;
}
