#pragma once

// JSON configuration files and report emission (aligned text tables plus one
// JSON record per line). Unknown keys and ill-typed values are rejected with
// ConfigInvalid; absent keys keep their defaults.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vloc/benchmark.hpp"
#include "vloc/error.hpp"
#include "vloc/model_pool.hpp"
#include "vloc/tracking.hpp"

namespace vloc {

using Json = nlohmann::json;

namespace config_detail {

inline void CheckKeys(const Json& j, std::initializer_list<std::string_view> keys,
                      std::string_view where) {
  Require(j.is_object(), ErrorCode::kConfigInvalid,
          std::string(where) + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (auto key : keys) known = known || key == k;
    Require(known, ErrorCode::kConfigInvalid,
            "unknown key '" + k + "' in " + std::string(where));
  }
}

template <typename T>
void Get(const Json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kConfigInvalid, std::string("key '") + key + "': " + e.what());
  }
}

}  // namespace config_detail

// ---------------------------------------------------------------------------
// Parsing.

inline SceneSpec ParseSceneSpec(const Json& j, SceneSpec s = {}) {
  using namespace config_detail;
  CheckKeys(j,
            {"num_planes", "num_lines", "points_per_plane", "points_per_line",
             "plane_point_counts", "line_point_counts", "num_clutter", "scene_extent",
             "num_cameras", "descriptor_dim", "descriptor_noise_sigma",
             "pixel_noise_sigma", "outlier_fraction", "seed", "image_width",
             "image_height", "focal_length", "arc_degrees", "look_at_jitter",
             "visibility_dropout", "min_points_per_camera", "min_views_per_point"},
            "scene");
  Get(j, "num_planes", s.num_planes);
  Get(j, "num_lines", s.num_lines);
  Get(j, "points_per_plane", s.points_per_plane);
  Get(j, "points_per_line", s.points_per_line);
  Get(j, "plane_point_counts", s.plane_point_counts);
  Get(j, "line_point_counts", s.line_point_counts);
  Get(j, "num_clutter", s.num_clutter);
  Get(j, "scene_extent", s.scene_extent);
  Get(j, "num_cameras", s.num_cameras);
  Get(j, "descriptor_dim", s.descriptor_dim);
  Get(j, "descriptor_noise_sigma", s.descriptor_noise_sigma);
  Get(j, "pixel_noise_sigma", s.pixel_noise_sigma);
  Get(j, "outlier_fraction", s.outlier_fraction);
  Get(j, "seed", s.seed);
  Get(j, "image_width", s.image_width);
  Get(j, "image_height", s.image_height);
  Get(j, "focal_length", s.focal_length);
  Get(j, "arc_degrees", s.arc_degrees);
  Get(j, "look_at_jitter", s.look_at_jitter);
  Get(j, "visibility_dropout", s.visibility_dropout);
  Get(j, "min_points_per_camera", s.min_points_per_camera);
  Get(j, "min_views_per_point", s.min_views_per_point);
  try {
    s.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kConfigInvalid, e.what());
  }
  return s;
}

inline Json ToJson(const SceneSpec& s) {
  return Json{{"num_planes", s.num_planes},
              {"num_lines", s.num_lines},
              {"points_per_plane", s.points_per_plane},
              {"points_per_line", s.points_per_line},
              {"plane_point_counts", s.plane_point_counts},
              {"line_point_counts", s.line_point_counts},
              {"num_clutter", s.num_clutter},
              {"scene_extent", s.scene_extent},
              {"num_cameras", s.num_cameras},
              {"descriptor_dim", s.descriptor_dim},
              {"descriptor_noise_sigma", s.descriptor_noise_sigma},
              {"pixel_noise_sigma", s.pixel_noise_sigma},
              {"outlier_fraction", s.outlier_fraction},
              {"seed", s.seed},
              {"image_width", s.image_width},
              {"image_height", s.image_height},
              {"focal_length", s.focal_length},
              {"arc_degrees", s.arc_degrees},
              {"look_at_jitter", s.look_at_jitter},
              {"visibility_dropout", s.visibility_dropout},
              {"min_points_per_camera", s.min_points_per_camera},
              {"min_views_per_point", s.min_views_per_point}};
}

inline RenderParams ParseRenderParams(const Json& j, RenderParams r = {}) {
  using namespace config_detail;
  CheckKeys(j, {"pixel_noise_sigma", "descriptor_noise_sigma", "outlier_fraction",
                "visibility_dropout"},
            "render");
  Get(j, "pixel_noise_sigma", r.pixel_noise_sigma);
  Get(j, "descriptor_noise_sigma", r.descriptor_noise_sigma);
  Get(j, "outlier_fraction", r.outlier_fraction);
  Get(j, "visibility_dropout", r.visibility_dropout);
  Require(r.pixel_noise_sigma >= 0 && r.descriptor_noise_sigma >= 0 &&
              r.outlier_fraction >= 0 && r.outlier_fraction < 1 &&
              r.visibility_dropout >= 0 && r.visibility_dropout < 1,
          ErrorCode::kConfigInvalid, "render parameters out of range");
  return r;
}

inline MatchParams ParseMatchParams(const Json& j, MatchParams m = {}) {
  using namespace config_detail;
  CheckKeys(j, {"ratio_threshold", "max_matches", "exact_mode"}, "match");
  Get(j, "ratio_threshold", m.ratio_threshold);
  Get(j, "max_matches", m.max_matches);
  Get(j, "exact_mode", m.exact_mode);
  return m;
}

inline RansacParams ParseRansacParams(const Json& j, RansacParams r = {}) {
  using namespace config_detail;
  CheckKeys(j, {"inlier_threshold", "max_iterations", "confidence", "seed"}, "ransac");
  Get(j, "inlier_threshold", r.inlier_threshold);
  Get(j, "max_iterations", r.max_iterations);
  Get(j, "confidence", r.confidence);
  Get(j, "seed", r.seed);
  return r;
}

inline LocalizeOptions ParseLocalizeOptions(const Json& j, LocalizeOptions o = {}) {
  using namespace config_detail;
  CheckKeys(j, {"refine", "known_intrinsics", "max_iterations", "relative_tolerance"},
            "localize");
  Get(j, "refine", o.refine);
  Get(j, "max_iterations", o.refine_params.max_iterations);
  Get(j, "relative_tolerance", o.refine_params.relative_tolerance);
  Get(j, "known_intrinsics", o.known_intrinsics);
  return o;
}

inline DetectParams ParseDetectParams(const Json& j, DetectParams d = {}) {
  using namespace config_detail;
  CheckKeys(j, {"inlier_threshold", "min_members", "max_iterations_per_structure",
                "max_structures", "seed"},
            "detect");
  Get(j, "inlier_threshold", d.inlier_threshold);
  if (j.contains("min_members")) {
    int m = 0;
    Get(j, "min_members", m);
    d.min_members = m;
  }
  Get(j, "max_iterations_per_structure", d.max_iterations_per_structure);
  Get(j, "max_structures", d.max_structures);
  Get(j, "seed", d.seed);
  Require(d.inlier_threshold > 0 && d.max_iterations_per_structure >= 1 &&
              d.max_structures >= 0,
          ErrorCode::kConfigInvalid, "detect parameters out of range");
  return d;
}

inline PoolParams ParsePoolParams(const Json& j, PoolParams p = {}) {
  using namespace config_detail;
  CheckKeys(j, {"t1", "t2", "swap_threshold", "invalid_window", "invalid_quota",
                "score_views", "ttl_seconds"},
            "pool");
  Get(j, "t1", p.verify.t1);
  Get(j, "t2", p.verify.t2);
  Get(j, "swap_threshold", p.swap_threshold);
  Get(j, "invalid_window", p.invalid_window);
  Get(j, "invalid_quota", p.invalid_quota);
  Get(j, "score_views", p.score_views);
  Get(j, "ttl_seconds", p.ttl_seconds);
  try {
    p.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kConfigInvalid, e.what());
  }
  return p;
}

inline TrackParams ParseTrackParams(const Json& j, TrackParams t = {}) {
  using namespace config_detail;
  CheckKeys(j, {"process_noise", "measurement_variance", "gate", "gating",
                "frame_interval", "initial_velocity_variance", "reinit_after"},
            "track");
  Get(j, "process_noise", t.process_noise);
  Get(j, "measurement_variance", t.measurement_variance);
  Get(j, "gate", t.gate);
  Get(j, "gating", t.gating);
  Get(j, "frame_interval", t.frame_interval);
  Get(j, "initial_velocity_variance", t.initial_velocity_variance);
  Get(j, "reinit_after", t.reinit_after);
  try {
    t.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kConfigInvalid, e.what());
  }
  return t;
}

inline CompressionMethod ParseMethod(const Json& j) {
  std::string name;
  try {
    name = j.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kConfigInvalid, std::string("method: ") + e.what());
  }
  const auto m = ParseCompressionMethod(name);
  Require(m.has_value(), ErrorCode::kConfigInvalid, "unknown method '" + name + "'");
  return *m;
}

inline BenchConfig ParseBenchConfig(const Json& j) {
  using namespace config_detail;
  CheckKeys(j, {"scene", "methods", "target_fraction", "count_tolerance", "num_queries",
                "reconstruction_noise", "query_render", "num_words", "match", "ransac",
                "localize", "detect"},
            "bench config");
  BenchConfig c;
  if (j.contains("scene")) c.scene = ParseSceneSpec(j["scene"]);
  if (j.contains("methods")) {
    Require(j["methods"].is_array(), ErrorCode::kConfigInvalid, "methods must be a list");
    c.methods.clear();
    for (const auto& m : j["methods"]) c.methods.push_back(ParseMethod(m));
  }
  Get(j, "target_fraction", c.target_fraction);
  Get(j, "count_tolerance", c.count_tolerance);
  Get(j, "num_queries", c.num_queries);
  Get(j, "reconstruction_noise", c.reconstruction_noise);
  if (j.contains("query_render")) c.query_render = ParseRenderParams(j["query_render"]);
  Get(j, "num_words", c.num_words);
  if (j.contains("match")) c.match = ParseMatchParams(j["match"]);
  if (j.contains("ransac")) c.ransac = ParseRansacParams(j["ransac"]);
  if (j.contains("localize")) c.localize = ParseLocalizeOptions(j["localize"]);
  if (j.contains("detect")) c.detect = ParseDetectParams(j["detect"]);
  c.Validate();
  return c;
}

inline SessionSimConfig ParseSessionSimConfig(const Json& j) {
  using namespace config_detail;
  CheckKeys(j, {"scene", "schedule", "num_regimes", "seeded_regimes",
                "views_per_session", "session_interval", "view_interval",
                "changed_fraction", "shift_strength", "method", "target_fraction",
                "reconstruction_noise", "query_render", "pool", "match", "ransac",
                "localize", "detect"},
            "sessions config");
  SessionSimConfig c;
  if (j.contains("scene")) c.scene = ParseSceneSpec(j["scene"]);
  Get(j, "schedule", c.schedule);
  Get(j, "num_regimes", c.num_regimes);
  Get(j, "seeded_regimes", c.seeded_regimes);
  Get(j, "views_per_session", c.views_per_session);
  Get(j, "session_interval", c.session_interval);
  Get(j, "view_interval", c.view_interval);
  Get(j, "changed_fraction", c.shift.changed_fraction);
  Get(j, "shift_strength", c.shift.strength);
  if (j.contains("method")) c.method = ParseMethod(j["method"]);
  Get(j, "target_fraction", c.target_fraction);
  Get(j, "reconstruction_noise", c.reconstruction_noise);
  if (j.contains("query_render")) c.query_render = ParseRenderParams(j["query_render"]);
  if (j.contains("pool")) c.pool = ParsePoolParams(j["pool"]);
  if (j.contains("match")) c.localization.match = ParseMatchParams(j["match"]);
  if (j.contains("ransac")) c.localization.ransac = ParseRansacParams(j["ransac"]);
  if (j.contains("localize")) c.localization.options = ParseLocalizeOptions(j["localize"]);
  if (j.contains("detect")) c.detect = ParseDetectParams(j["detect"]);
  c.Validate();
  return c;
}

inline Json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  try {
    return Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kConfigInvalid, path.string() + ": " + e.what());
  }
}

inline void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  Require(static_cast<bool>(out), ErrorCode::kIo, "write failed on " + path.string());
}

// ---------------------------------------------------------------------------
// Reports.

// Fixed-precision number for tables ("-" for NaN).
inline std::string Fixed(double v, int precision = 2) {
  if (std::isnan(v)) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

// Pads every column to its widest cell; numbers right-aligned.
inline std::string AlignedTable(const std::vector<std::string>& header,
                                const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) {
      width[c] = std::max(width[c], r[c].size());
    }
  }
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string cell = c < cells.size() ? cells[c] : "";
      if (c > 0) os << "  ";
      if (c == 0) {
        os << std::left << std::setw(static_cast<int>(width[c])) << cell;
      } else {
        os << std::right << std::setw(static_cast<int>(width[c])) << cell;
      }
    }
    os << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& r : rows) line(r);
  return os.str();
}

// NaN is not representable in JSON; it becomes null.
inline Json Number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json ToJson(const MethodRow& r, std::uint64_t seed) {
  return Json{{"seed", seed},
              {"method", ToString(r.method)},
              {"parameter", r.parameter},
              {"truncated", r.truncated},
              {"points", r.num_points},
              {"size_mb", SizeMegabytes(r.size_bytes)},
              {"mean_cm", Number(r.mean_cm)},
              {"stdev_cm", Number(r.stdev_cm)},
              {"registration_rate", r.registration_rate}};
}

inline std::string BenchTable(std::span<const BenchReport> reports) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& rep : reports) {
    for (const auto& r : rep.rows) {
      rows.push_back({std::string(ToString(r.method)), std::to_string(rep.seed),
                      Fixed(r.parameter, r.method == CompressionMethod::kTopVisibility ? 4 : 0) +
                          (r.truncated ? "*" : ""),
                      std::to_string(r.num_points), Fixed(SizeMegabytes(r.size_bytes)),
                      Fixed(r.mean_cm), Fixed(r.stdev_cm), Fixed(r.registration_rate),
                      Fixed(r.wall_seconds, 1)});
    }
  }
  return AlignedTable({"method", "seed", "k/frac", "points", "size_mb", "mean_cm",
                       "stdev_cm", "reg_rate", "time_s"},
                      rows);
}

// One record per row. Wall times are left out so records are reproducible.
inline std::string BenchJsonl(std::span<const BenchReport> reports) {
  std::string out;
  for (const auto& rep : reports) {
    for (const auto& r : rep.rows) out += ToJson(r, rep.seed).dump() + "\n";
  }
  return out;
}

inline Json ToJson(const PoolDecision& d) {
  return Json{{"session", d.session_id}, {"view", d.view},
              {"event", ToString(d.event)}, {"model", d.model_id},
              {"score", d.score},          {"time", d.time}};
}

inline std::string SessionTable(const SessionSimReport& rep) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : rep.sessions) {
    rows.push_back({std::to_string(s.session_id), std::to_string(s.regime),
                    std::to_string(s.active_before) + "->" + std::to_string(s.active_after),
                    s.constructed ? "new" : (s.triggered ? "swap" : ""),
                    Fixed(s.fixed.mean), Fixed(s.fixed_registration),
                    Fixed(s.updated.mean), Fixed(s.updated_registration)});
  }
  rows.push_back({"shifted", "", "", "", Fixed(rep.fixed_shifted.mean), "",
                  Fixed(rep.updated_shifted.mean), ""});
  return AlignedTable({"session", "regime", "active", "action", "fixed_cm", "fixed_reg",
                       "updated_cm", "updated_reg"},
                      rows);
}

inline std::string SessionJsonl(const SessionSimReport& rep) {
  std::string out;
  for (const auto& s : rep.sessions) {
    out += Json{{"seed", rep.seed},
                {"session", s.session_id},
                {"regime", s.regime},
                {"active_before", s.active_before},
                {"active_after", s.active_after},
                {"triggered", s.triggered},
                {"constructed", s.constructed},
                {"fixed_mean_cm", Number(s.fixed.mean)},
                {"fixed_registration", s.fixed_registration},
                {"updated_mean_cm", Number(s.updated.mean)},
                {"updated_registration", s.updated_registration}}
               .dump() +
           "\n";
  }
  return out;
}

inline std::string DecisionJsonl(std::span<const PoolDecision> decisions) {
  std::string out;
  for (const auto& d : decisions) out += ToJson(d).dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Pool manifest: records with their model files, thresholds and the active id.

struct ManifestRecord {
  std::uint64_t id = 0;
  std::string model_file;
  double created = 0.0;
  double last_used = 0.0;
  std::string condition;
};

struct PoolManifest {
  PoolParams params;
  std::vector<ManifestRecord> records;
  std::optional<std::uint64_t> active;
};

inline Json ToJson(const PoolManifest& m) {
  Json recs = Json::array();
  for (const auto& r : m.records) {
    recs.push_back({{"id", r.id},
                    {"model_file", r.model_file},
                    {"created", r.created},
                    {"last_used", r.last_used},
                    {"condition", r.condition}});
  }
  const auto& p = m.params;
  return Json{{"pool",
               {{"t1", p.verify.t1},
                {"t2", p.verify.t2},
                {"swap_threshold", p.swap_threshold},
                {"invalid_window", p.invalid_window},
                {"invalid_quota", p.invalid_quota},
                {"score_views", p.score_views},
                {"ttl_seconds", p.ttl_seconds}}},
              {"records", recs},
              {"active", m.active ? Json(*m.active) : Json(nullptr)}};
}

inline PoolManifest ParsePoolManifest(const Json& j) {
  using namespace config_detail;
  CheckKeys(j, {"pool", "records", "active"}, "manifest");
  PoolManifest m;
  if (j.contains("pool")) m.params = ParsePoolParams(j["pool"]);
  if (j.contains("records")) {
    Require(j["records"].is_array(), ErrorCode::kConfigInvalid, "records must be a list");
    for (const auto& r : j["records"]) {
      CheckKeys(r, {"id", "model_file", "created", "last_used", "condition"}, "record");
      ManifestRecord rec;
      Get(r, "id", rec.id);
      Get(r, "model_file", rec.model_file);
      Get(r, "created", rec.created);
      Get(r, "last_used", rec.last_used);
      Get(r, "condition", rec.condition);
      Require(rec.created <= rec.last_used, ErrorCode::kConfigInvalid,
              "record created after last use");
      m.records.push_back(std::move(rec));
    }
  }
  if (j.contains("active") && !j["active"].is_null()) {
    std::uint64_t a = 0;
    Get(j, "active", a);
    m.active = a;
  }
  if (!m.records.empty()) {
    Require(m.active.has_value(), ErrorCode::kConfigInvalid, "active id missing");
    bool found = false;
    for (const auto& r : m.records) found = found || r.id == *m.active;
    Require(found, ErrorCode::kConfigInvalid, "active id not among records");
  }
  return m;
}

}  // namespace vloc
