#include <gtest/gtest.h>

#include <filesystem>

#include "model_fixtures.hpp"
#include "test_util.hpp"
#include "vloc/scene_synth.hpp"
#include "vloc/serialization.hpp"

namespace vloc {
namespace {

using testing::RandomModelFile;

ErrorCode DecodeError(std::span<const std::uint8_t> bytes) {
  try {
    DecodeModel(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode succeeded";
  return ErrorCode::kInvalidArgument;
}

TEST(ModelFile, RoundTripRandom) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const ModelFile file = RandomModelFile(seed);
    const auto bytes = EncodeModel(file);
    EXPECT_EQ(DecodeModel(bytes), file) << "seed " << seed;
    EXPECT_EQ(EncodeModel(DecodeModel(bytes)), bytes);
  }
}

TEST(ModelFile, RoundTripGeneratedScene) {
  SceneSpec spec;
  spec.seed = 3;
  const auto scene = GenerateScene(spec);
  ModelFile file{BuildModel(scene, 0.01, 4), testing::GroundTruthLabeling(scene),
                 std::nullopt};
  file.compression = CompressWeightedKCover(file.model, *file.labeling, 20);
  const auto path = std::filesystem::temp_directory_path() / "vloc_roundtrip.vlm";
  const auto written = SaveModel(file, path);
  EXPECT_EQ(written, std::filesystem::file_size(path));
  EXPECT_EQ(LoadModel(path), file);
  std::filesystem::remove(path);
}

TEST(ModelFile, EmptyModelRoundTrips) {
  const ModelFile file{};
  EXPECT_EQ(DecodeModel(EncodeModel(file)), file);
}

TEST(ModelFile, TruncationIsTyped) {
  const auto bytes = EncodeModel(RandomModelFile(7));
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    EXPECT_EQ(DecodeError(std::span(bytes).first(len)), ErrorCode::kTruncatedPayload)
        << "length " << len;
  }
}

TEST(ModelFile, VersionMismatch) {
  auto bytes = EncodeModel(RandomModelFile(8));
  testing::SetVersion(bytes, kModelFormatVersion + 1);
  EXPECT_EQ(DecodeError(bytes), ErrorCode::kVersionMismatch);
}

TEST(ModelFile, HeaderBitFlipsDetected) {
  const auto bytes = EncodeModel(RandomModelFile(9));
  for (std::size_t bit = 0; bit < kModelHeaderSize * 8; ++bit) {
    auto copy = bytes;
    copy[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    EXPECT_EQ(DecodeError(copy), ErrorCode::kCorruptHeader) << "bit " << bit;
  }
}

TEST(ModelFile, PayloadBitFlipsDetected) {
  const auto bytes = EncodeModel(RandomModelFile(10));
  for (std::size_t byte = kModelHeaderSize; byte < bytes.size(); ++byte) {
    auto copy = bytes;
    copy[byte] ^= 0x10;
    EXPECT_EQ(DecodeError(copy), ErrorCode::kCorruptPayload) << "byte " << byte;
  }
}

TEST(ModelFile, TrailingBytesRejected) {
  auto bytes = EncodeModel(RandomModelFile(11));
  bytes.push_back(0);
  EXPECT_EQ(DecodeError(bytes), ErrorCode::kCorruptPayload);
}

TEST(ModelFile, MissingFileIsIoError) {
  try {
    LoadModel("/nonexistent/dir/model.vlm");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(ModelFile, CompressedSizeRatio) {
  SceneSpec spec;
  spec.seed = 12;
  const auto scene = GenerateScene(spec);
  const auto model = BuildModel(scene, 0.01, 13);
  const auto c = CompressTopVisibility(model, testing::GroundTruthLabeling(scene), 0.05);
  const double ratio = static_cast<double>(SerializedSize(Materialize(model, c))) /
                       static_cast<double>(SerializedSize(model));
  EXPECT_GE(ratio, 0.03);
  EXPECT_LE(ratio, 0.20);
  EXPECT_DOUBLE_EQ(SizeMegabytes(2'500'000), 2.5);
}

}  // namespace
}  // namespace vloc
