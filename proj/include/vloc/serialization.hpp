#pragma once

// Binary model files. Layout, all integers and floats little-endian:
//
//   header (88 bytes)
//     magic "VLOCMODL", u32 version, u32 flags, u64 model_id,
//     u32 descriptor_dim, u32 reserved, u64 num_points, u64 num_descriptors,
//     u64 num_cameras, u64 num_visibility_entries, u64 payload_size,
//     u64 payload_checksum, u64 header_checksum
//   payload
//     positions (3 x f64 per point), descriptor offsets (u32, N + 1),
//     descriptors (f32, dim x M, column-major), visibility (per point: u32
//     count, u32 camera ids), then the optional labeling and compression
//     sections announced by `flags`.
//
// Checksums are 64-bit FNV-1a; the header checksum covers the preceding 80
// bytes.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vloc/compression.hpp"
#include "vloc/error.hpp"
#include "vloc/model.hpp"
#include "vloc/structure_detect.hpp"

namespace vloc {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

inline constexpr char kModelMagic[8] = {'V', 'L', 'O', 'C', 'M', 'O', 'D', 'L'};
inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr std::size_t kModelHeaderSize = 88;

struct ModelFile {
  PointCloudModel model;
  std::optional<StructureLabeling> labeling;
  std::optional<CompressedModel> compression;

  bool operator==(const ModelFile&) const = default;
};

inline double SizeMegabytes(std::uint64_t bytes) { return static_cast<double>(bytes) / 1e6; }

inline std::uint64_t Fnv1a(std::span<const std::uint8_t> bytes,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace io_detail {

enum Flags : std::uint32_t { kHasLabeling = 1u, kHasCompression = 2u };

class Writer {
 public:
  std::vector<std::uint8_t> bytes;

  template <typename T>
  void Put(T v) {
    static_assert(std::is_integral_v<T>);
    using U = std::make_unsigned_t<T>;
    U u = static_cast<U>(v);
    for (std::size_t k = 0; k < sizeof(T); ++k) {
      bytes.push_back(static_cast<std::uint8_t>(u & 0xffu));
      if constexpr (sizeof(T) > 1) u >>= 8;
    }
  }
  void PutF64(double v) { Put(std::bit_cast<std::uint64_t>(v)); }
  void PutF32(float v) { Put(std::bit_cast<std::uint32_t>(v)); }
  void PutBytes(const char* p, std::size_t n) { bytes.insert(bytes.end(), p, p + n); }
  void PutIds(std::span<const std::uint32_t> ids) {
    Put<std::uint64_t>(ids.size());
    for (auto i : ids) Put(i);
  }
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t remaining() const { return data_.size() - pos_; }

  // Guards allocations: `count` elements of `size` bytes must still be there.
  void Need(std::uint64_t count, std::uint64_t size) const {
    if (size != 0 && count > remaining() / size) {
      Fail(ErrorCode::kTruncatedPayload, "payload shorter than its counts");
    }
  }

  template <typename T>
  T Get() {
    Need(1, sizeof(T));
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) {
      u |= static_cast<U>(static_cast<U>(data_[pos_ + k]) << (8 * k));
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  double GetF64() { return std::bit_cast<double>(Get<std::uint64_t>()); }
  float GetF32() { return std::bit_cast<float>(Get<std::uint32_t>()); }
  std::vector<std::uint32_t> GetIds() {
    const auto n = Get<std::uint64_t>();
    Need(n, 4);
    std::vector<std::uint32_t> ids(n);
    for (auto& i : ids) i = Get<std::uint32_t>();
    return ids;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline void Corrupt(bool ok, const std::string& what) {
  Require(ok, ErrorCode::kCorruptPayload, what);
}

}  // namespace io_detail

inline std::vector<std::uint8_t> EncodeModel(const ModelFile& file) {
  using io_detail::Writer;
  const PointCloudModel& m = file.model;
  m.Validate();
  Writer payload;
  for (const auto& p : m.positions) {
    for (int a = 0; a < 3; ++a) payload.PutF64(p[a]);
  }
  for (auto o : m.descriptor_offsets) payload.Put<std::uint32_t>(o);
  for (Eigen::Index c = 0; c < m.descriptors.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.descriptors.rows(); ++r) {
      payload.PutF32(m.descriptors(r, c));
    }
  }
  for (PointId i = 0; i < m.num_points(); ++i) {
    const auto cams = m.visibility.CamerasOf(i);
    payload.Put<std::uint32_t>(static_cast<std::uint32_t>(cams.size()));
    for (auto j : cams) payload.Put<std::uint32_t>(j);
  }
  std::uint32_t flags = 0;
  if (file.labeling) {
    flags |= io_detail::kHasLabeling;
    const auto& lab = *file.labeling;
    payload.Put<std::uint64_t>(lab.num_points);
    payload.Put<std::uint64_t>(lab.structures.size());
    for (const auto& s : lab.structures) {
      if (const auto* pl = std::get_if<PlaneStructure>(&s)) {
        payload.Put<std::uint8_t>(0);
        for (int a = 0; a < 3; ++a) payload.PutF64(pl->normal[a]);
        payload.PutF64(pl->offset);
        payload.PutIds(pl->member_ids);
      } else {
        const auto& ln = std::get<LineStructure>(s);
        payload.Put<std::uint8_t>(1);
        for (int a = 0; a < 3; ++a) payload.PutF64(ln.anchor[a]);
        for (int a = 0; a < 3; ++a) payload.PutF64(ln.direction[a]);
        payload.PutIds(ln.member_ids);
      }
    }
    payload.PutIds(lab.residual_ids);
  }
  if (file.compression) {
    flags |= io_detail::kHasCompression;
    const auto& c = *file.compression;
    payload.Put<std::uint64_t>(c.source_model_id);
    payload.Put<std::uint8_t>(static_cast<std::uint8_t>(c.method));
    payload.PutF64(c.parameter);
    payload.PutIds(c.selected_ids);
    payload.PutIds(c.camera_counts);
  }

  Writer out;
  out.PutBytes(kModelMagic, sizeof(kModelMagic));
  out.Put<std::uint32_t>(kModelFormatVersion);
  out.Put<std::uint32_t>(flags);
  out.Put<std::uint64_t>(m.model_id);
  out.Put<std::uint32_t>(static_cast<std::uint32_t>(m.descriptor_dim));
  out.Put<std::uint32_t>(0);
  out.Put<std::uint64_t>(m.num_points());
  out.Put<std::uint64_t>(m.num_descriptors());
  out.Put<std::uint64_t>(m.num_cameras());
  out.Put<std::uint64_t>(m.visibility.NumEntries());
  out.Put<std::uint64_t>(payload.bytes.size());
  out.Put<std::uint64_t>(Fnv1a(payload.bytes));
  out.Put<std::uint64_t>(Fnv1a(out.bytes));
  out.bytes.insert(out.bytes.end(), payload.bytes.begin(), payload.bytes.end());
  return out.bytes;
}

inline ModelFile DecodeModel(std::span<const std::uint8_t> bytes) {
  using io_detail::Corrupt;
  using io_detail::Reader;
  if (bytes.size() >= sizeof(kModelMagic)) {
    Require(std::memcmp(bytes.data(), kModelMagic, sizeof(kModelMagic)) == 0,
            ErrorCode::kCorruptHeader, "bad magic");
  }
  Require(bytes.size() >= kModelHeaderSize, ErrorCode::kTruncatedPayload,
          "file shorter than the header");
  Reader h(bytes.first(kModelHeaderSize));
  for (std::size_t k = 0; k < sizeof(kModelMagic); ++k) h.Get<std::uint8_t>();
  const auto version = h.Get<std::uint32_t>();
  const auto flags = h.Get<std::uint32_t>();
  const auto model_id = h.Get<std::uint64_t>();
  const auto dim = h.Get<std::uint32_t>();
  const auto reserved = h.Get<std::uint32_t>();
  const auto num_points = h.Get<std::uint64_t>();
  const auto num_desc = h.Get<std::uint64_t>();
  const auto num_cameras = h.Get<std::uint64_t>();
  const auto num_entries = h.Get<std::uint64_t>();
  const auto payload_size = h.Get<std::uint64_t>();
  const auto payload_sum = h.Get<std::uint64_t>();
  const auto header_sum = h.Get<std::uint64_t>();
  Require(Fnv1a(bytes.first(kModelHeaderSize - 8)) == header_sum,
          ErrorCode::kCorruptHeader, "header checksum mismatch");
  Require(version == kModelFormatVersion, ErrorCode::kVersionMismatch,
          "format version " + std::to_string(version) + ", expected " +
              std::to_string(kModelFormatVersion));
  Require(reserved == 0 && (flags & ~3u) == 0 && dim > 0 &&
              num_points < (1ULL << 32) && num_cameras < (1ULL << 32) &&
              num_desc < (1ULL << 32),
          ErrorCode::kCorruptHeader, "header fields out of range");

  const auto body = bytes.subspan(kModelHeaderSize);
  Require(body.size() >= payload_size, ErrorCode::kTruncatedPayload,
          "payload has " + std::to_string(body.size()) + " of " +
              std::to_string(payload_size) + " bytes");
  Corrupt(body.size() == payload_size, "trailing bytes after payload");
  Corrupt(Fnv1a(body) == payload_sum, "payload checksum mismatch");

  Reader r(body);
  ModelFile file;
  PointCloudModel& m = file.model;
  m.model_id = model_id;
  m.descriptor_dim = static_cast<int>(dim);
  r.Need(num_points, 24);
  m.positions.resize(num_points);
  for (auto& p : m.positions) {
    for (int a = 0; a < 3; ++a) p[a] = r.GetF64();
  }
  r.Need(num_points + 1, 4);
  m.descriptor_offsets.resize(num_points + 1);
  for (auto& o : m.descriptor_offsets) o = r.Get<std::uint32_t>();
  r.Need(num_desc, 4ULL * dim);
  m.descriptors.resize(dim, static_cast<Eigen::Index>(num_desc));
  for (Eigen::Index c = 0; c < m.descriptors.cols(); ++c) {
    for (Eigen::Index row = 0; row < m.descriptors.rows(); ++row) {
      m.descriptors(row, c) = r.GetF32();
    }
  }
  std::vector<std::vector<CameraId>> lists(num_points);
  std::uint64_t entries = 0;
  for (auto& l : lists) {
    const auto n = r.Get<std::uint32_t>();
    r.Need(n, 4);
    l.resize(n);
    for (auto& j : l) {
      j = r.Get<std::uint32_t>();
      Corrupt(j < num_cameras, "visibility camera out of range");
    }
    entries += n;
  }
  Corrupt(entries == num_entries, "visibility entry count mismatch");
  m.visibility = VisibilityMatrix::FromPointLists(num_cameras, lists);
  Corrupt(m.visibility.NumEntries() == num_entries, "duplicate visibility entries");

  if (flags & io_detail::kHasLabeling) {
    StructureLabeling lab;
    lab.num_points = r.Get<std::uint64_t>();
    const auto ns = r.Get<std::uint64_t>();
    r.Need(ns, 9);
    for (std::uint64_t s = 0; s < ns; ++s) {
      const auto kind = r.Get<std::uint8_t>();
      Corrupt(kind <= 1, "unknown structure kind");
      if (kind == 0) {
        PlaneStructure pl;
        for (int a = 0; a < 3; ++a) pl.normal[a] = r.GetF64();
        pl.offset = r.GetF64();
        pl.member_ids = r.GetIds();
        lab.structures.emplace_back(std::move(pl));
      } else {
        LineStructure ln;
        for (int a = 0; a < 3; ++a) ln.anchor[a] = r.GetF64();
        for (int a = 0; a < 3; ++a) ln.direction[a] = r.GetF64();
        ln.member_ids = r.GetIds();
        lab.structures.emplace_back(std::move(ln));
      }
    }
    lab.residual_ids = r.GetIds();
    Corrupt(lab.num_points == num_points && lab.IsPartition(),
            "labeling is not a partition of the points");
    file.labeling = std::move(lab);
  }
  if (flags & io_detail::kHasCompression) {
    CompressedModel c;
    c.source_model_id = r.Get<std::uint64_t>();
    const auto method = r.Get<std::uint8_t>();
    Corrupt(method <= static_cast<std::uint8_t>(CompressionMethod::kNone),
            "unknown compression method");
    c.method = static_cast<CompressionMethod>(method);
    c.parameter = r.GetF64();
    c.selected_ids = r.GetIds();
    c.camera_counts = r.GetIds();
    file.compression = std::move(c);
  }
  Corrupt(r.remaining() == 0, "unparsed bytes in payload");
  try {
    m.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kCorruptPayload, e.what());
  }
  return file;
}

inline std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  Require(!ec, ErrorCode::kIo, "cannot stat " + path.string());
  std::vector<std::uint8_t> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  Require(static_cast<std::uint64_t>(in.gcount()) == size, ErrorCode::kIo,
          "short read on " + path.string());
  return bytes;
}

inline void WriteFileBytes(const std::filesystem::path& path,
                           std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  Require(static_cast<bool>(out), ErrorCode::kIo, "write failed on " + path.string());
}

// Returns the number of bytes written.
inline std::uint64_t SaveModel(const ModelFile& file, const std::filesystem::path& path) {
  const auto bytes = EncodeModel(file);
  WriteFileBytes(path, bytes);
  return bytes.size();
}

inline std::uint64_t SaveModel(const PointCloudModel& model,
                               const std::filesystem::path& path) {
  return SaveModel(ModelFile{model, std::nullopt, std::nullopt}, path);
}

inline ModelFile LoadModel(const std::filesystem::path& path) {
  return DecodeModel(ReadFileBytes(path));
}

inline std::uint64_t SerializedSize(const PointCloudModel& model) {
  return EncodeModel(ModelFile{model, std::nullopt, std::nullopt}).size();
}

}  // namespace vloc
