// vloc command-line front end.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vloc/vloc.hpp"

namespace fs = std::filesystem;
using namespace vloc;

namespace {

struct Common {
  std::uint64_t seed = 1;
  std::string config;
  std::string out = ".";
};

// Name of the step currently running, used to tag failures.
std::string g_stage = "startup";

void Stage(const std::string& s) { g_stage = s; }

void AddCommon(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "random seed")->capture_default_str();
  app->add_option("--config", c.config, "JSON configuration file");
  app->add_option("--out", c.out, "output directory")->capture_default_str();
}

fs::path OutDir(const Common& c) {
  Stage("prepare-output");
  fs::create_directories(c.out);
  return c.out;
}

Json ConfigOrEmpty(const Common& c) {
  if (c.config.empty()) return Json::object();
  Stage("read-config");
  return ReadJsonFile(c.config);
}

// Scene files hold the generating spec; the scene is regenerated on load.
GroundTruthScene LoadScene(const std::string& path) {
  Stage("load-scene");
  const Json j = ReadJsonFile(path);
  Require(j.contains("scene"), ErrorCode::kConfigInvalid, path + ": missing 'scene'");
  Stage("generate-scene");
  return GenerateScene(ParseSceneSpec(j["scene"]));
}

ModelFile LoadModelFile(const std::string& path) {
  Stage("load-model");
  return LoadModel(path);
}

std::string Vec(const Eigen::Vector3d& v) {
  return "(" + Fixed(v.x(), 3) + ", " + Fixed(v.y(), 3) + ", " + Fixed(v.z(), 3) + ")";
}

int RunGen(const Common& c) {
  const Json cfg = ConfigOrEmpty(c);
  SceneSpec spec = ParseSceneSpec(cfg.contains("scene") ? cfg["scene"] : cfg);
  spec.seed = c.seed;
  Stage("generate-scene");
  const GroundTruthScene scene = GenerateScene(spec);
  const fs::path dir = OutDir(c);
  Stage("write-scene");
  Json structures = Json::array();
  for (const auto& s : scene.structures) {
    structures.push_back({{"kind", s.kind == StructureKind::kPlane ? "plane" : "line"},
                          {"anchor", {s.anchor.x(), s.anchor.y(), s.anchor.z()}},
                          {"direction", {s.direction.x(), s.direction.y(), s.direction.z()}}});
  }
  Json cameras = Json::array();
  for (const auto& v : scene.cameras) {
    const Point3D ctr = v.pose.Center();
    cameras.push_back({ctr.x(), ctr.y(), ctr.z()});
  }
  const Json out{{"scene", ToJson(spec)},
                 {"num_points", scene.num_points()},
                 {"structures", structures},
                 {"camera_centers", cameras}};
  WriteText(dir / "scene.json", out.dump(2) + "\n");
  std::cout << "scene: " << scene.num_points() << " points, " << scene.cameras.size()
            << " cameras, " << scene.structures.size() << " structures -> "
            << (dir / "scene.json").string() << "\n";
  return 0;
}

int RunBuild(const Common& c, const std::string& scene_path, double noise) {
  const GroundTruthScene scene = LoadScene(scene_path);
  Stage("build-model");
  const PointCloudModel model = BuildModel(scene, noise, c.seed);
  const fs::path dir = OutDir(c);
  Stage("write-model");
  const auto bytes = SaveModel(model, dir / "model.vlm");
  std::cout << "model: " << model.num_points() << " points, " << model.num_descriptors()
            << " descriptors, " << Fixed(SizeMegabytes(bytes)) << " MB -> "
            << (dir / "model.vlm").string() << "\n";
  return 0;
}

int RunDetect(const Common& c, const std::string& model_path) {
  const Json cfg = ConfigOrEmpty(c);
  DetectParams dp = ParseDetectParams(cfg.contains("detect") ? cfg["detect"] : cfg);
  dp.seed = c.seed;
  ModelFile file = LoadModelFile(model_path);
  Stage("detect-structures");
  file.labeling = DetectStructures(file.model.positions, dp);
  const fs::path dir = OutDir(c);
  Stage("write-model");
  SaveModel(file, dir / "labeled.vlm");
  std::vector<std::vector<std::string>> rows;
  std::string jsonl;
  for (std::size_t l = 0; l < file.labeling->structures.size(); ++l) {
    const auto& s = file.labeling->structures[l];
    Json rec{{"structure", l}, {"members", MembersOf(s).size()}};
    if (const auto* p = std::get_if<PlaneStructure>(&s)) {
      rec["kind"] = "plane";
      rec["normal"] = {p->normal.x(), p->normal.y(), p->normal.z()};
      rec["offset"] = p->offset;
      rows.push_back({std::to_string(l), "plane", std::to_string(p->member_ids.size()),
                      Vec(p->normal)});
    } else {
      const auto& ln = std::get<LineStructure>(s);
      rec["kind"] = "line";
      rec["anchor"] = {ln.anchor.x(), ln.anchor.y(), ln.anchor.z()};
      rec["direction"] = {ln.direction.x(), ln.direction.y(), ln.direction.z()};
      rows.push_back({std::to_string(l), "line", std::to_string(ln.member_ids.size()),
                      Vec(ln.direction)});
    }
    jsonl += rec.dump() + "\n";
  }
  rows.push_back({"residual", "", std::to_string(file.labeling->residual_ids.size()), ""});
  WriteText(dir / "structures.jsonl", jsonl);
  std::cout << AlignedTable({"group", "kind", "members", "normal/direction"}, rows);
  return 0;
}

int RunCompress(const Common& c, const std::string& model_path, const std::string& method_name,
                int k, double fraction) {
  ModelFile file = LoadModelFile(model_path);
  Stage("parse-method");
  const auto method = ParseCompressionMethod(method_name);
  Require(method.has_value(), ErrorCode::kConfigInvalid, "unknown method '" + method_name + "'");
  if (!file.labeling && (*method == CompressionMethod::kWeightedKCover ||
                         *method == CompressionMethod::kTopVisibility)) {
    Stage("detect-structures");
    DetectParams dp;
    dp.seed = c.seed;
    file.labeling = DetectStructures(file.model.positions, dp);
  }
  Stage("compress");
  CompressedModel cm;
  switch (*method) {
    case CompressionMethod::kWeightedKCover:
      cm = CompressWeightedKCover(file.model, *file.labeling, k);
      break;
    case CompressionMethod::kSetKCover:
      cm = CompressSetKCover(file.model, k);
      break;
    case CompressionMethod::kTopVisibility:
      cm = CompressTopVisibility(file.model, *file.labeling, fraction);
      break;
    case CompressionMethod::kNone:
      cm.method = CompressionMethod::kNone;
      cm.source_model_id = file.model.model_id;
      for (PointId i = 0; i < file.model.num_points(); ++i) cm.selected_ids.push_back(i);
      cm.camera_counts = CameraCounts(file.model.visibility, cm.selected_ids);
      break;
  }
  const CoverageStats stats =
      CoverageReport(file.model, cm, k, file.labeling ? &*file.labeling : nullptr);
  const fs::path dir = OutDir(c);
  Stage("write-model");
  const auto bytes = SaveModel(ModelFile{Materialize(file.model, cm), std::nullopt, cm},
                               dir / "compressed.vlm");
  const Json cov{{"method", ToString(cm.method)},
                 {"parameter", cm.parameter},
                 {"points", cm.selected_ids.size()},
                 {"retained_fraction", stats.retained_fraction},
                 {"camera_counts", stats.camera_counts},
                 {"num_saturated", stats.num_saturated},
                 {"structure_counts", stats.structure_counts},
                 {"size_mb", SizeMegabytes(bytes)}};
  WriteText(dir / "coverage.json", cov.dump(2) + "\n");
  std::cout << ToString(cm.method) << ": kept " << cm.selected_ids.size() << " of "
            << file.model.num_points() << " points (" << Fixed(100 * stats.retained_fraction)
            << "%), " << stats.num_saturated << " saturated cameras, "
            << Fixed(SizeMegabytes(bytes)) << " MB\n";
  return 0;
}

int RunLocalize(const Common& c, const std::string& model_path, const std::string& scene_path,
                int views) {
  const Json cfg = ConfigOrEmpty(c);
  config_detail::CheckKeys(cfg, {"match", "ransac", "localize", "query_render", "num_words"},
                           "localize config");
  MatchParams mp = cfg.contains("match") ? ParseMatchParams(cfg["match"]) : MatchParams{};
  RansacParams rp = cfg.contains("ransac") ? ParseRansacParams(cfg["ransac"]) : RansacParams{};
  LocalizeOptions lo =
      cfg.contains("localize") ? ParseLocalizeOptions(cfg["localize"]) : LocalizeOptions{};
  RenderParams render{1.0, 0.03, 0.2, 0.3};
  if (cfg.contains("query_render")) render = ParseRenderParams(cfg["query_render"]);
  int words = 0;
  config_detail::Get(cfg, "num_words", words);

  const ModelFile file = LoadModelFile(model_path);
  const GroundTruthScene scene = LoadScene(scene_path);
  Stage("build-index");
  const int w = words > 0 ? words : DefaultWordCount(file.model.num_points());
  const MatchIndex index = BuildIndex(
      file.model, std::min<int>(w, static_cast<int>(file.model.num_descriptors())),
      DeriveSeed(c.seed, 41));
  Stage("render-queries");
  const auto queries = RenderQueries(scene, views, render, c.seed);
  Stage("localize");
  std::vector<std::vector<std::string>> rows;
  std::string jsonl;
  std::vector<double> errors;
  for (std::size_t v = 0; v < queries.size(); ++v) {
    rp.seed = DeriveSeed(c.seed, 43, v);
    const auto r = Localize(queries[v], index, mp, rp, lo);
    const bool ok = Verify(r);
    Json rec{{"view", v}, {"registered", r.registered()}, {"verified", ok},
             {"correspondences", r.num_correspondences}, {"inliers", r.num_inliers}};
    std::string err = "-";
    if (r.registered()) {
      const double e = PositionErrorCm(r, queries[v]);
      errors.push_back(e);
      err = Fixed(e);
      const Point3D ctr = r.Center();
      rec["center"] = {ctr.x(), ctr.y(), ctr.z()};
      rec["error_cm"] = e;
      rec["mean_reprojection_px"] = r.mean_reprojection_error;
    } else {
      rec["failure_stage"] = ToString(r.failure->stage);
      rec["failure"] = r.failure->message;
    }
    jsonl += rec.dump() + "\n";
    rows.push_back({std::to_string(v),
                    r.registered() ? "yes" : std::string(ToString(r.failure->stage)),
                    std::to_string(r.num_correspondences), std::to_string(r.num_inliers),
                    ok ? "pass" : "fail", err});
  }
  const fs::path dir = OutDir(c);
  Stage("write-results");
  WriteText(dir / "localize.jsonl", jsonl);
  std::cout << AlignedTable({"view", "registered", "N_c", "N_I", "verify", "error_cm"}, rows);
  const auto st = Summarize(errors);
  std::cout << "registered " << st.count << "/" << queries.size() << ", mean "
            << Fixed(st.mean) << " cm, stdev " << Fixed(st.stdev) << " cm\n";
  return 0;
}

std::vector<Measurement> ReadMeasurements(const std::string& path) {
  Stage("read-measurements");
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path);
  std::vector<Measurement> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
      Measurement m;
      m.time = j.at("t").get<double>();
      if (j.contains("position") && !j["position"].is_null()) {
        const auto p = j["position"].get<std::vector<double>>();
        Require(p.size() == 3, ErrorCode::kConfigInvalid, "position needs 3 values");
        m.position = Eigen::Vector3d(p[0], p[1], p[2]);
      }
      out.push_back(m);
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorCode::kConfigInvalid, path + ": " + e.what());
    }
  }
  return out;
}

int RunTrack(const Common& c, const std::string& input) {
  const Json cfg = ConfigOrEmpty(c);
  config_detail::CheckKeys(cfg, {"track", "trajectory"}, "track config");
  const TrackParams tp = cfg.contains("track") ? ParseTrackParams(cfg["track"]) : TrackParams{};
  TrajectorySpec ts;
  if (cfg.contains("trajectory")) {
    const Json& t = cfg["trajectory"];
    config_detail::CheckKeys(t, {"frames", "frame_interval", "speed", "turn_radius",
                                 "noise_sigma", "outlier_fraction", "outlier_magnitude",
                                 "dropout"},
                             "trajectory");
    config_detail::Get(t, "frames", ts.frames);
    config_detail::Get(t, "frame_interval", ts.frame_interval);
    config_detail::Get(t, "speed", ts.speed);
    config_detail::Get(t, "turn_radius", ts.turn_radius);
    config_detail::Get(t, "noise_sigma", ts.noise_sigma);
    config_detail::Get(t, "outlier_fraction", ts.outlier_fraction);
    config_detail::Get(t, "outlier_magnitude", ts.outlier_magnitude);
    config_detail::Get(t, "dropout", ts.dropout);
  }
  std::optional<SimulatedTrajectory> sim;
  std::vector<Measurement> meas;
  if (input.empty()) {
    Stage("simulate-trajectory");
    sim = SimulateTrajectory(ts, c.seed);
    meas = sim->measurements;
  } else {
    meas = ReadMeasurements(input);
  }
  Stage("smooth");
  const auto states = SmoothTrajectory(meas, tp);
  const fs::path dir = OutDir(c);
  Stage("write-track");
  std::string jsonl;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const auto& s = states[k];
    jsonl += Json{{"t", s.time},
                  {"position", {s.position.x(), s.position.y(), s.position.z()}},
                  {"velocity", {s.velocity.x(), s.velocity.y(), s.velocity.z()}},
                  {"updated", s.updated}}
                 .dump() +
             "\n";
  }
  WriteText(dir / "track.jsonl", jsonl);
  std::cout << "smoothed " << states.size() << " frames -> " << (dir / "track.jsonl").string()
            << "\n";
  if (sim) {
    std::vector<std::optional<Eigen::Vector3d>> raw, smooth;
    for (std::size_t k = 0; k < states.size(); ++k) {
      raw.push_back(meas[k].position);
      smooth.push_back(states[k].position);
    }
    std::cout << "raw RMSE " << Fixed(100 * Rmse(sim->truth, raw)) << " cm, smoothed RMSE "
              << Fixed(100 * Rmse(sim->truth, smooth)) << " cm\n";
  }
  return 0;
}

struct PoolArgs {
  std::string manifest;
  std::string add;
  std::string condition;
  double time = 0.0;
  std::int64_t activate = -1;
  std::optional<double> prune_at;
  std::vector<std::size_t> verify;
  std::string ingest_scene;
  int views = 10;
  std::uint64_t shift_seed = 0;
};

ModelRecord LoadRecord(const ManifestRecord& m, const fs::path& base, std::uint64_t seed) {
  Stage("load-pool-model");
  auto model = std::make_shared<PointCloudModel>(LoadModel(base / m.model_file).model);
  Stage("build-index");
  ModelRecord r;
  r.id = m.id;
  r.index = std::make_shared<MatchIndex>(
      BuildIndex(*model, std::min<int>(DefaultWordCount(model->num_points()),
                                       static_cast<int>(model->num_descriptors())),
                 DeriveSeed(seed, 41)));
  r.model = std::move(model);
  r.created = m.created;
  r.last_used = m.last_used;
  r.condition = m.condition;
  return r;
}

int RunPool(const Common& c, const PoolArgs& a) {
  if (a.verify.size() == 2) {
    Stage("verify");
    const Json cfg = ConfigOrEmpty(c);
    const PoolParams pp = cfg.contains("pool") ? ParsePoolParams(cfg["pool"]) : PoolParams{};
    const bool ok = Verify(a.verify[0], a.verify[1], pp.verify);
    std::cout << "N_c=" << a.verify[0] << " N_I=" << a.verify[1] << " -> "
              << (ok ? "accepted" : "rejected") << "\n";
    if (a.manifest.empty()) return 0;
  }
  Require(!a.manifest.empty(), ErrorCode::kConfigInvalid, "--manifest is required");
  Stage("read-manifest");
  PoolManifest man;
  if (fs::exists(a.manifest)) {
    man = ParsePoolManifest(ReadJsonFile(a.manifest));
  } else if (!c.config.empty()) {
    const Json cfg = ReadJsonFile(c.config);
    if (cfg.contains("pool")) man.params = ParsePoolParams(cfg["pool"]);
  }
  const fs::path base = fs::absolute(a.manifest).parent_path();
  if (!a.add.empty()) {
    Stage("add-model");
    const ModelFile f = LoadModelFile(a.add);
    ManifestRecord r;
    for (const auto& e : man.records) r.id = std::max(r.id, e.id);
    r.id += 1;
    r.model_file = fs::relative(fs::absolute(a.add), base).string();
    r.created = r.last_used = a.time;
    r.condition = a.condition;
    man.records.push_back(r);
    if (!man.active) man.active = r.id;
    std::cout << "added model " << r.id << " (" << f.model.num_points() << " points)\n";
  }
  if (a.activate >= 0) {
    Stage("activate");
    bool found = false;
    for (const auto& r : man.records) found = found || r.id == static_cast<std::uint64_t>(a.activate);
    Require(found, ErrorCode::kInvalidArgument, "no record " + std::to_string(a.activate));
    man.active = static_cast<std::uint64_t>(a.activate);
  }
  std::string decisions;
  if (!a.ingest_scene.empty()) {
    Require(!man.records.empty(), ErrorCode::kPoolEmpty, "model pool is empty");
    GroundTruthScene scene = LoadScene(a.ingest_scene);
    if (a.shift_seed != 0) {
      Stage("appearance-shift");
      scene = ApplyAppearanceShift(scene, AppearanceShift{a.shift_seed, 0.95, 1.0});
    }
    ModelPool pool(man.params);
    for (const auto& r : man.records) pool.Add(LoadRecord(r, base, c.seed));
    pool.SetActive(*man.active);
    Stage("render-session");
    SessionBatch batch;
    batch.session_id = c.seed;
    batch.views = RenderQueries(scene, a.views, RenderParams{1.0, 0.03, 0.2, 0.3}, c.seed);
    for (int v = 0; v < a.views; ++v) batch.timestamps.push_back(a.time + v);
    Stage("ingest-session");
    LocalizationParams loc;
    loc.ransac.seed = c.seed;
    const IngestReport rep = IngestSession(pool, batch, loc);
    decisions = DecisionJsonl(rep.decisions);
    std::size_t verified = 0;
    for (const auto& v : rep.views) verified += v.verified ? 1 : 0;
    std::cout << "session: " << verified << "/" << rep.views.size() << " views verified, "
              << (rep.triggered ? "swap evaluated" : "no trigger") << ", active model "
              << *pool.active_id() << "\n";
    man.active = pool.active_id();
    std::vector<ManifestRecord> kept;
    for (auto r : man.records) {
      if (const ModelRecord* rec = pool.Find(r.id)) {
        r.last_used = rec->last_used;
        kept.push_back(r);
      }
    }
    man.records = kept;
  }
  if (a.prune_at) {
    Stage("prune");
    std::vector<ManifestRecord> kept;
    for (const auto& r : man.records) {
      if (r.id != man.active && *a.prune_at - r.last_used > man.params.ttl_seconds) {
        std::cout << "pruned model " << r.id << "\n";
      } else {
        kept.push_back(r);
      }
    }
    man.records = kept;
  }
  Stage("write-manifest");
  fs::create_directories(base);
  WriteText(a.manifest, ToJson(man).dump(2) + "\n");
  const fs::path dir = OutDir(c);
  if (!decisions.empty()) WriteText(dir / "decisions.jsonl", decisions);
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : man.records) {
    rows.push_back({std::to_string(r.id), man.active && *man.active == r.id ? "*" : "",
                    r.model_file, Fixed(r.created, 0), Fixed(r.last_used, 0), r.condition});
  }
  std::cout << AlignedTable({"id", "active", "model", "created", "last_used", "condition"},
                            rows);
  return 0;
}

int RunBench(const Common& c, int seeds) {
  const Json cfg = ConfigOrEmpty(c);
  Stage("parse-config");
  const BenchConfig bc = ParseBenchConfig(cfg);
  Require(seeds >= 1, ErrorCode::kConfigInvalid, "--seeds must be >= 1");
  std::vector<BenchReport> reports;
  for (int s = 0; s < seeds; ++s) {
    Stage("bench-seed-" + std::to_string(c.seed + s));
    reports.push_back(RunBenchmark(bc, c.seed + static_cast<std::uint64_t>(s)));
  }
  const fs::path dir = OutDir(c);
  Stage("write-report");
  const std::string table = BenchTable(reports);
  WriteText(dir / "bench.txt", table);
  WriteText(dir / "bench.jsonl", BenchJsonl(reports));
  std::cout << table;
  return 0;
}

int RunSessions(const Common& c) {
  const Json cfg = ConfigOrEmpty(c);
  Stage("parse-config");
  const SessionSimConfig sc = ParseSessionSimConfig(cfg);
  Stage("simulate-sessions");
  const SessionSimReport rep = RunSessionSim(sc, c.seed);
  const fs::path dir = OutDir(c);
  Stage("write-report");
  const std::string table = SessionTable(rep);
  WriteText(dir / "sessions.txt", table);
  WriteText(dir / "sessions.jsonl", SessionJsonl(rep));
  WriteText(dir / "decisions.jsonl", DecisionJsonl(rep.decisions));
  std::cout << table << "new models constructed: " << rep.constructions
            << ", final pool size: " << rep.final_pool_size << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-aware model compression and visual localization"};
  app.require_subcommand(1);

  Common gen_c, build_c, detect_c, compress_c, localize_c, track_c, pool_c, bench_c, sess_c;
  auto* gen = app.add_subcommand("gen", "generate a synthetic scene");
  AddCommon(gen, gen_c);

  auto* build = app.add_subcommand("build", "build a point-cloud model from a scene");
  AddCommon(build, build_c);
  std::string build_scene;
  double build_noise = 0.01;
  build->add_option("--scene", build_scene, "scene.json from gen")->required();
  build->add_option("--noise", build_noise, "reconstruction position noise (m)")
      ->capture_default_str();

  auto* detect = app.add_subcommand("detect", "detect planes and lines in a model");
  AddCommon(detect, detect_c);
  std::string detect_model;
  detect->add_option("--model", detect_model, "model file")->required();

  auto* compress = app.add_subcommand("compress", "compress a model");
  AddCommon(compress, compress_c);
  std::string compress_model, method = "weighted_kcover";
  int k = 10;
  double fraction = 0.1;
  compress->add_option("--model", compress_model, "model file")->required();
  compress->add_option("--method", method,
                       "weighted_kcover | set_kcover | top_visibility | full")
      ->capture_default_str();
  compress->add_option("--k", k, "points required per camera")->capture_default_str();
  compress->add_option("--fraction", fraction, "kept fraction for top_visibility")
      ->capture_default_str();

  auto* localize = app.add_subcommand("localize", "localize rendered views against a model");
  AddCommon(localize, localize_c);
  std::string loc_model, loc_scene;
  int loc_views = 10;
  localize->add_option("--model", loc_model, "model file")->required();
  localize->add_option("--scene", loc_scene, "scene.json the views are rendered from")
      ->required();
  localize->add_option("--views", loc_views, "number of query views")->capture_default_str();

  auto* track = app.add_subcommand("track", "Kalman-smooth a position track");
  AddCommon(track, track_c);
  std::string track_input;
  track->add_option("--input", track_input,
                    "JSONL measurements {\"t\":..,\"position\":[x,y,z]|null}; "
                    "a synthetic walk is simulated when absent");

  auto* pool = app.add_subcommand("pool", "maintain a model-pool manifest");
  AddCommon(pool, pool_c);
  PoolArgs pa;
  pool->add_option("--manifest", pa.manifest, "pool manifest (created if missing)");
  pool->add_option("--add", pa.add, "model file to add");
  pool->add_option("--condition", pa.condition, "condition tag of the added model");
  pool->add_option("--time", pa.time, "timestamp (s) for --add and --ingest-scene");
  pool->add_option("--activate", pa.activate, "make this record active");
  pool->add_option("--prune-at", pa.prune_at, "drop records unused since before now - TTL");
  pool->add_option("--verify", pa.verify, "check N_c N_I against the thresholds")
      ->expected(2);
  pool->add_option("--ingest-scene", pa.ingest_scene, "run a session rendered from scene.json");
  pool->add_option("--views", pa.views, "views in the ingested session")->capture_default_str();
  pool->add_option("--shift-seed", pa.shift_seed, "appearance shift of the session (0: none)");

  auto* bench = app.add_subcommand("bench", "compression benchmark");
  AddCommon(bench, bench_c);
  int bench_seeds = 1;
  bench->add_option("--seeds", bench_seeds, "number of consecutive seeds")
      ->capture_default_str();

  auto* sessions = app.add_subcommand("sessions", "long-term session simulation");
  AddCommon(sessions, sess_c);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return RunGen(gen_c);
    if (build->parsed()) return RunBuild(build_c, build_scene, build_noise);
    if (detect->parsed()) return RunDetect(detect_c, detect_model);
    if (compress->parsed()) return RunCompress(compress_c, compress_model, method, k, fraction);
    if (localize->parsed()) return RunLocalize(localize_c, loc_model, loc_scene, loc_views);
    if (track->parsed()) return RunTrack(track_c, track_input);
    if (pool->parsed()) return RunPool(pool_c, pa);
    if (bench->parsed()) return RunBench(bench_c, bench_seeds);
    if (sessions->parsed()) return RunSessions(sess_c);
  } catch (const Error& e) {
    std::cerr << "error [" << g_stage << "] " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error [" << g_stage << "] " << e.what() << "\n";
    return 3;
  }
  return 1;
}
