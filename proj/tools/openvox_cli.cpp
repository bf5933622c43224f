// openvox: build, query and evaluate open-vocabulary instance maps, and
// generate exploration trajectories with their coverage.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "openvox/coverage.hpp"
#include "openvox/error.hpp"
#include "openvox/frame.hpp"
#include "openvox/pipeline.hpp"
#include "openvox/retrieval.hpp"
#include "openvox/run_config.hpp"
#include "openvox/snapshot.hpp"
#include "openvox/synthbench.hpp"
#include "openvox/tensor_io.hpp"
#include "openvox/trajgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace openvox;

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kAgentTrajectoryName = "agent_trajectory.json";

enum class Level { Error, Warn, Info, Debug };

Level log_level() {
  static const Level level = [] {
    const char* env = std::getenv("OPENVOX_LOG_LEVEL");
    const std::string s = env ? env : "info";
    if (s == "error") return Level::Error;
    if (s == "warn") return Level::Warn;
    if (s == "debug") return Level::Debug;
    return Level::Info;
  }();
  return level;
}

void log(Level level, const std::string& msg) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= log_level()) std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

json report_header(const RunConfig& config) {
  return {{"format_version", kFormatVersion}, {"config", json::parse(run_config_json(config))}};
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text_file(path, j.dump(2) + "\n");
}

json parse_json(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

fs::path require_path(const std::string& value, const char* what) {
  if (value.empty()) throw ValidationError(std::string("missing ") + what);
  return value;
}

// Options shared by every subcommand. Flags left unset keep the config value.
struct Common {
  std::string config_file;
  std::optional<std::string> input;
  std::optional<std::string> output;
  std::optional<double> resolution;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app) {
    app->add_option("-c,--config", config_file, "JSON run configuration");
    app->add_option("-i,--input", input, "Input path");
    app->add_option("-o,--output", output, "Output path");
    app->add_option("--resolution", resolution, "Voxel size in meters");
    app->add_option("--seed", seed, "Random seed");
  }

  RunConfig load() const {
    RunConfig c = config_file.empty() ? RunConfig{} : read_run_config(config_file);
    if (input) c.input = *input;
    if (output) c.output = *output;
    if (resolution) c.resolution = *resolution;
    if (seed) c.seed = *seed;
    return c;
  }
};

template <class T>
void override_with(T& field, const std::optional<T>& flag) {
  if (flag) field = *flag;
}

void finish_config(RunConfig& c) {
  c.resolve();
  c.validate();
}

// ---------------------------------------------------------------- synth

struct SynthFlags {
  std::optional<int> frames, boxes, classes, rooms_x, rooms_y, width, height;
  std::optional<double> depth_sigma, feature_sigma, mask_dropout;

  void add(CLI::App* app) {
    app->add_option("--frames", frames, "Orbit frames (single room) or frames per room");
    app->add_option("--boxes", boxes, "Boxes per room");
    app->add_option("--classes", classes, "Number of classes");
    app->add_option("--rooms-x", rooms_x);
    app->add_option("--rooms-y", rooms_y);
    app->add_option("--width", width);
    app->add_option("--height", height);
    app->add_option("--depth-sigma", depth_sigma);
    app->add_option("--feature-sigma", feature_sigma);
    app->add_option("--mask-dropout", mask_dropout);
  }

  void apply(RunConfig& c) const {
    auto& y = c.synth;
    override_with(y.scene.boxes, boxes);
    override_with(y.scene.classes, classes);
    override_with(y.rooms_x, rooms_x);
    override_with(y.rooms_y, rooms_y);
    override_with(y.width, width);
    override_with(y.height, height);
    override_with(y.noise.depth_sigma, depth_sigma);
    override_with(y.noise.feature_sigma, feature_sigma);
    override_with(y.noise.mask_dropout, mask_dropout);
    if (frames) (y.multiroom() ? y.frames_per_room : y.frames) = *frames;
  }
};

void cmd_synth(const RunConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = require_path(c.output, "--output");
  const auto& y = c.synth;
  SyntheticScene scene;
  std::vector<RigidPose> poses;
  if (y.multiroom()) {
    MultiRoomConfig mc{y.scene, y.rooms_x, y.rooms_y, y.room_spacing};
    scene = generate_multiroom_scene(mc);
    poses = room_tour(scene, y.frames_per_room, y.orbit_radius, y.camera_height);
  } else {
    scene = generate_scene(y.scene);
    poses = orbit_trajectory(scene, y.frames, y.orbit_radius, y.camera_height);
  }
  log(Level::Info, "rendering " + std::to_string(poses.size()) + " frames of " + std::to_string(scene.boxes.size()) +
                       " boxes into " + out.string());
  const Intrinsics intr = default_intrinsics(y.width, y.height, y.hfov_deg);
  BenchmarkLayout layout;
  layout.root = out;
  write_benchmark(scene, poses, intr, y.noise, y.render, c.resolution, layout);
  json r = report_header(c);
  r["frames"] = poses.size();
  r["boxes"] = scene.boxes.size();
  r["classes"] = scene.classes();
  r["scene_file"] = layout.scene_file;
  r["gt_dir"] = layout.gt_dir;
  r["table_file"] = layout.table_file;
  r["milliseconds"] = elapsed_ms(t0);
  write_json(out / "synth_report.json", r);
}

// ---------------------------------------------------------------- map

void cmd_map(const RunConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path in = require_path(c.input, "--input");
  const fs::path out = require_path(c.output, "--output");
  const TrajectoryIndex index = read_trajectory_index(in);
  fs::create_directories(out);
  std::ofstream run_log(out / "run_log.jsonl");
  if (!run_log) throw IoError("cannot write " + (out / "run_log.jsonl").string());

  MappingSession session(c.pipeline);
  // Decode frame k + 1 while frame k is being fused.
  auto load = [&](std::size_t k) { return load_frame(in / index.frames[k]); };
  std::future<FrameRecord> next;
  if (!index.frames.empty()) next = std::async(std::launch::async, load, 0);
  for (std::size_t k = 0; k < index.frames.size(); ++k) {
    FrameRecord frame = next.get();
    if (k + 1 < index.frames.size()) next = std::async(std::launch::async, load, k + 1);
    const FrameLog fl = session.process(frame);
    json dropped = json::array();
    for (const auto& d : fl.dropped) dropped.push_back({{"segment", d.segment}, {"reason", d.reason}});
    json line = {{"frame_id", fl.report.frame_id},     {"segments", fl.segments},
                 {"detections", fl.report.detections}, {"matched", fl.report.matched},
                 {"created", fl.report.created},       {"merged", fl.report.merged},
                 {"active", fl.report.active},         {"instances", fl.stats.instances},
                 {"voxels", fl.stats.voxels},          {"memory_bytes", fl.stats.memory_bytes},
                 {"milliseconds", fl.milliseconds},    {"dropped", dropped}};
    run_log << line.dump() << "\n";
    log(Level::Debug, "frame " + std::to_string(fl.report.frame_id) + ": " + std::to_string(fl.stats.instances) +
                          " instances");
  }
  const FinalReport fin = session.finish();
  save_map(session.map(), out / "map");
  const MapStats st = session.map().stats();
  log(Level::Info, "mapped " + std::to_string(index.frames.size()) + " frames, " + std::to_string(fin.instances) +
                       " instances");

  json r = report_header(c);
  r["frames"] = index.frames.size();
  r["final"] = {{"merged", fin.merged}, {"removed", fin.removed}, {"instances", fin.instances}};
  r["voxels"] = st.voxels;
  r["memory_bytes"] = st.memory_bytes;
  r["config_hash"] = config_hash(c.resolution, c.pipeline.association);
  r["milliseconds"] = elapsed_ms(t0);
  write_json(out / "map_report.json", r);
}

// ---------------------------------------------------------------- query

struct QueryFlags {
  std::string map, table, embedding, csv;
  std::vector<std::string> text;
  std::size_t k = 5;

  void add(CLI::App* app) {
    app->add_option("--map", map, "Map snapshot directory")->required();
    app->add_option("--table", table, "Text embedding table (JSON)");
    app->add_option("--text", text, "Class name(s) looked up in the table");
    app->add_option("--embedding", embedding, "Query embedding(s), f32 [D] or [Q, D]");
    app->add_option("-k", k, "Results per query");
    app->add_option("--csv", csv, "Also write results as CSV");
  }
};

void cmd_query(const RunConfig& c, const QueryFlags& q) {
  if (q.k == 0) throw ValidationError("-k must be positive");
  const InstanceMap map = load_map(q.map);
  struct Query {
    std::string label;
    std::vector<float> vec;
  };
  std::vector<Query> queries;
  if (!q.text.empty()) {
    const TextEmbeddingTable table = read_table(require_path(q.table, "--table for --text"));
    for (const auto& name : q.text) {
      const auto it = std::find(table.names.begin(), table.names.end(), name);
      if (it == table.names.end()) throw ValidationError("class not in table: " + name);
      const auto row = static_cast<std::size_t>(it - table.names.begin()) * table.dim;
      queries.push_back({name, {table.embeddings.begin() + row, table.embeddings.begin() + row + table.dim}});
    }
  }
  if (!q.embedding.empty()) {
    const Tensor t = read_tensor(q.embedding);
    const auto v = t.f32();
    if (t.ndim() == 1) {
      queries.push_back({q.embedding, {v.begin(), v.end()}});
    } else if (t.ndim() == 2) {
      const std::size_t d = t.dims()[1];
      for (std::size_t i = 0; i < t.dims()[0]; ++i)
        queries.push_back({q.embedding + "[" + std::to_string(i) + "]", {v.begin() + i * d, v.begin() + (i + 1) * d}});
    } else {
      throw ValidationError("query embedding must be [D] or [Q, D]");
    }
  }
  if (queries.empty()) throw ValidationError("query needs --text or --embedding");

  json results = json::array();
  std::ostringstream csv;
  csv << "Query,Rank,ID,Cosine,X,Y,Z,Voxels\n";
  for (const auto& qu : queries) {
    json hits = json::array();
    const auto ranked = rank_instances(map, qu.vec, q.k);
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      const Instance& inst = *map.find(ranked[r].id);
      Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
      for (const auto& key : inst.voxels.keys()) centroid += inst.voxels.center(key);
      centroid /= static_cast<double>(std::max<std::size_t>(1, inst.voxels.size()));
      hits.push_back({{"id", ranked[r].id},
                      {"cosine", ranked[r].cosine},
                      {"centroid", {centroid.x(), centroid.y(), centroid.z()}},
                      {"voxels", inst.voxels.size()}});
      csv << qu.label << "," << r + 1 << "," << ranked[r].id << "," << ranked[r].cosine << "," << centroid.x() << ","
          << centroid.y() << "," << centroid.z() << "," << inst.voxels.size() << "\n";
    }
    results.push_back({{"query", qu.label}, {"results", hits}});
  }
  json r = report_header(c);
  r["instances"] = map.instances().size();
  r["queries"] = results;
  if (!q.csv.empty()) write_text_file(q.csv, csv.str());
  if (c.output.empty())
    std::cout << r.dump(2) << "\n";
  else
    write_json(c.output, r);
}

// ---------------------------------------------------------------- eval

struct EvalFlags {
  std::string map, gt, table, match = "both";
  std::optional<double> d_assign;

  void add(CLI::App* app) {
    app->add_option("--map", map, "Map snapshot directory")->required();
    app->add_option("--gt", gt, "Ground-truth directory (default: <input>/gt)");
    app->add_option("--table", table, "Text embedding table (default: <input>/classes.json)");
    app->add_option("--match", match, "Instance matching: all-pairs, strict-iou or both")
        ->check(CLI::IsMember({"all-pairs", "strict-iou", "both"}));
    app->add_option("--d-assign", d_assign, "Dense transfer distance in meters");
  }
};

json retrieval_json(const RetrievalMetrics& m) {
  json acc = json::object();
  for (const auto& [k, v] : m.acc_at_k) acc[std::to_string(k)] = v;
  return {{"acc_at_k", acc}, {"auc", m.auc}, {"curve", m.curve}, {"matched", m.matched}};
}

void cmd_eval(RunConfig c, const EvalFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  override_with(c.evaluation.d_assign, f.d_assign);
  const fs::path gt_dir = !f.gt.empty() ? fs::path(f.gt) : require_path(c.input, "--gt or --input") / "gt";
  const fs::path table_path =
      !f.table.empty() ? fs::path(f.table) : require_path(c.input, "--table or --input") / "classes.json";
  const InstanceMap map = load_map(f.map);
  const GroundTruth gt = read_ground_truth(gt_dir);
  const TextEmbeddingTable table = read_table(table_path);

  std::vector<MatchMode> modes;
  if (f.match != "strict-iou") modes.push_back(MatchMode::AllPairs);
  if (f.match != "all-pairs") modes.push_back(MatchMode::StrictIou);

  json r = report_header(c);
  json warnings = json::array();
  if (map.instances().empty()) warnings.push_back("map has no instances; every metric is zero");
  json retrieval = json::object();
  for (std::size_t i = 0; i < modes.size(); ++i) {
    EvaluationConfig ec = c.evaluation;
    ec.match_mode = modes[i];
    const EvaluationReport er = evaluate_map(map, gt, table, ec);
    if (i == 0) {
      const auto& s = er.segmentation;
      json per_class = json::array();
      for (std::size_t k = 0; k < table.classes(); ++k)
        per_class.push_back({{"name", table.names[k]},
                             {"accuracy", s.class_accuracy[k]},
                             {"iou", s.class_iou[k]},
                             {"support", s.class_support[k]}});
      r["segmentation"] = {{"macc", s.macc},
                           {"miou", s.miou},
                           {"fmiou", s.fmiou},
                           {"present_classes", s.present_classes},
                           {"classes", per_class}};
      r["unassigned_fraction"] = er.unassigned_fraction;
      r["predicted_instances"] = er.predicted_instances;
      r["gt_instances"] = er.gt_instances;
    }
    json matches = json::array();
    for (const auto& m : er.matches) matches.push_back({{"pred", m.pred}, {"gt", m.gt}, {"iou", m.iou}});
    json rj = retrieval_json(er.retrieval);
    rj["matches"] = matches;
    retrieval[modes[i] == MatchMode::AllPairs ? "all_pairs" : "strict_iou"] = rj;
  }
  r["retrieval"] = retrieval;
  r["warnings"] = warnings;
  r["milliseconds"] = elapsed_ms(t0);
  for (const auto& w : warnings) log(Level::Warn, w.get<std::string>());
  if (c.output.empty())
    std::cout << r.dump(2) << "\n";
  else
    write_json(c.output, r);
}

// ---------------------------------------------------------------- trajgen

struct TrajgenFlags {
  std::string scene, grid;
  std::optional<double> cell_size, clearance;

  void add(CLI::App* app) {
    app->add_option("--scene", scene, "Scene JSON (default: <input>/scene.json)");
    app->add_option("--grid", grid, "Occupancy grid, u8 [H, W], nonzero = occupied");
    app->add_option("--cell-size", cell_size, "Cell size in meters");
    app->add_option("--clearance", clearance, "Obstacle inflation in meters (scene input only)");
  }
};

void cmd_trajgen(RunConfig c, const TrajgenFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  override_with(c.trajgen.cell_size, f.cell_size);
  override_with(c.trajgen.clearance, f.clearance);
  finish_config(c);
  const fs::path out = require_path(c.output, "--output");

  OccupancyGrid grid;
  if (!f.grid.empty()) {
    const Tensor t = read_tensor(f.grid);
    if (t.ndim() != 2) throw ValidationError("occupancy grid must be u8 [H, W]");
    const auto v = t.u8();
    grid = OccupancyGrid::all_free(static_cast<int>(t.dims()[1]), static_cast<int>(t.dims()[0]), c.trajgen.cell_size);
    grid.occupied.assign(v.begin(), v.end());
  } else {
    const fs::path scene_path = !f.scene.empty() ? fs::path(f.scene) : require_path(c.input, "--scene") / "scene.json";
    grid = occupancy_from_scene(read_scene(scene_path), c.trajgen.cell_size, c.trajgen.margin, c.trajgen.clearance);
  }
  grid.validate();

  const ComponentResult comp = largest_component(grid);
  if (comp.largest == 0) throw ValidationError("occupancy grid has no free cells");
  const PlaceDecomposition places = extract_places(comp.grid);
  const PlaceGraph graph = build_place_graph(comp.grid, places);
  const Tour tour = chinese_postman(graph);
  const AgentTrajectory traj = smooth_trajectory(tour, graph, comp.grid);
  log(Level::Info, std::to_string(places.places.size()) + " places, " + std::to_string(graph.edges.size()) +
                       " edges, " + std::to_string(traj.actions.size()) + " actions");

  json r = report_header(c);
  r["grid"] = {{"width", grid.width},
               {"height", grid.height},
               {"cell_size", grid.cell_size},
               {"origin", {grid.origin.x(), grid.origin.y()}},
               {"free_cells", comp.total_free},
               {"largest_component_cells", comp.largest},
               {"largest_component_ratio", comp.ratio}};
  json pj = json::array();
  for (const auto& p : places.places)
    pj.push_back({{"x", p.position.x()}, {"y", p.position.y()}, {"cell", {p.cell.x, p.cell.y}}, {"clearance", p.clearance}});
  json ej = json::array();
  for (const auto& e : graph.edges) ej.push_back({{"u", e.u}, {"v", e.v}, {"length", e.length}});
  json sj = json::array();
  for (const auto& s : tour.steps) sj.push_back({{"from", s.from}, {"to", s.to}, {"edge", s.edge}});
  r["places"] = pj;
  r["edges"] = ej;
  r["tour"] = {{"start", tour.start},
               {"steps", sj},
               {"length", tour.length},
               {"optimal", tour.optimal},
               {"duplicated_edges", tour.duplicated_edges}};
  json poses = json::array();
  for (const auto& p : traj.poses) poses.push_back({p.x, p.y, p.yaw});
  json actions = json::array();
  for (auto a : traj.actions) actions.push_back(action_name(a));
  r["sensor_height"] = traj.sensor_height;
  r["poses"] = poses;
  r["actions"] = actions;
  r["milliseconds"] = elapsed_ms(t0);
  write_json(out / kAgentTrajectoryName, r);
}

// ---------------------------------------------------------------- coverage

struct CoverageFlags {
  std::string scene, trajectory;
  std::optional<double> threshold;

  void add(CLI::App* app) {
    app->add_option("--scene", scene, "Scene JSON (default: <input>/scene.json)");
    app->add_option("--trajectory", trajectory, "Agent trajectory written by trajgen")->required();
    app->add_option("--threshold", threshold, "Per-object coverage threshold in percent");
  }
};

std::vector<AgentPose> read_agent_poses(const fs::path& path, double& sensor_height) {
  const json j = parse_json(path);
  try {
    if (j.at("format_version").get<int>() != kFormatVersion) throw FormatError(path.string() + ": unsupported version");
    sensor_height = j.at("sensor_height").get<double>();
    std::vector<AgentPose> poses;
    for (const auto& p : j.at("poses")) {
      if (!p.is_array() || p.size() != 3) throw FormatError(path.string() + ": pose must be [x, y, yaw]");
      poses.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
    return poses;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void cmd_coverage(RunConfig c, const CoverageFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  override_with(c.coverage.threshold_percent, f.threshold);
  finish_config(c);
  const fs::path out = require_path(c.output, "--output");
  const fs::path scene_path = !f.scene.empty() ? fs::path(f.scene) : require_path(c.input, "--scene") / "scene.json";
  const SyntheticScene scene = read_scene(scene_path);
  double sensor_height = c.coverage.sensor_height;
  const auto agent = read_agent_poses(f.trajectory, sensor_height);
  std::vector<CameraPose> poses;
  for (const auto& p : agent) poses.push_back(agent_camera(p, sensor_height));
  const CoverageReport rep =
      coverage_analysis(coverage_scene(scene, c.resolution), poses, c.coverage.camera, c.coverage.threshold_percent);
  fs::create_directories(out);
  write_text_file(out / "coverage.csv", coverage_csv(rep));
  json r = report_header(c);
  r["poses"] = rep.poses;
  r["surface_voxels"] = rep.surface_voxels;
  r["covered_surface_voxels"] = rep.covered_surface_voxels;
  r["surface_coverage"] = rep.surface_coverage;
  r["covered_object_ratio"] = rep.covered_object_ratio;
  r["object_threshold_percent"] = rep.object_threshold_percent;
  r["objects"] = rep.rows.size();
  r["milliseconds"] = elapsed_ms(t0);
  write_json(out / "coverage.json", r);
  log(Level::Info, "surface coverage " + std::to_string(100.0 * rep.surface_coverage) + "%");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-vocabulary voxel instance mapping"};
  app.require_subcommand(1);

  Common common;
  SynthFlags synth;
  QueryFlags query;
  EvalFlags eval;
  TrajgenFlags trajgen;
  CoverageFlags coverage;

  auto* s_synth = app.add_subcommand("synth", "Render a synthetic benchmark");
  auto* s_map = app.add_subcommand("map", "Build an instance map from a frame sequence");
  auto* s_query = app.add_subcommand("query", "Rank map instances against text or embedding queries");
  auto* s_eval = app.add_subcommand("eval", "Dense segmentation and retrieval metrics");
  auto* s_traj = app.add_subcommand("trajgen", "Exploration trajectory over a floor plan");
  auto* s_cov = app.add_subcommand("coverage", "Surface coverage of a trajectory");
  for (auto* s : {s_synth, s_map, s_query, s_eval, s_traj, s_cov}) common.add(s);
  synth.add(s_synth);
  query.add(s_query);
  eval.add(s_eval);
  trajgen.add(s_traj);
  coverage.add(s_cov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    RunConfig config = common.load();
    if (s_synth->parsed()) {
      synth.apply(config);
      finish_config(config);
      cmd_synth(config);
    } else if (s_map->parsed()) {
      finish_config(config);
      cmd_map(config);
    } else if (s_query->parsed()) {
      finish_config(config);
      cmd_query(config, query);
    } else if (s_eval->parsed()) {
      finish_config(config);
      cmd_eval(config, eval);
    } else if (s_traj->parsed()) {
      cmd_trajgen(config, trajgen);
    } else if (s_cov->parsed()) {
      cmd_coverage(config, coverage);
    }
  } catch (const ValidationError& e) {
    log(Level::Error, e.what());
    return 2;
  } catch (const IoError& e) {
    log(Level::Error, e.what());
    return 3;
  } catch (const fs::filesystem_error& e) {
    log(Level::Error, e.what());
    return 3;
  } catch (const std::exception& e) {
    log(Level::Error, std::string("internal error: ") + e.what());
    return 4;
  }
  return 0;
}
