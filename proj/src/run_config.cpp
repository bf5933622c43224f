#include "openvox/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "openvox/error.hpp"

namespace openvox {
namespace {

using nlohmann::json;

// Walks one JSON object, recording which keys were consumed so that leftovers
// can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError("config: " + where() + " must be an object");
  }

  void number(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }
  void number(const char* key, float& out) {
    double d = out;
    number(key, d);
    out = static_cast<float>(d);
  }
  template <class Int>
  void integer(const char* key, Int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) fail(key, "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned() == false && v->get<std::int64_t>() < 0) fail(key, "must be non-negative");
      }
      out = v->get<Int>();
    }
  }
  void text(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }
  bool has(const char* key) const { return j_.contains(key); }

  template <class F>
  void child(const char* key, F&& f) {
    if (const json* v = take(key)) {
      Section s(*v, path_.empty() ? key : path_ + "." + key);
      f(s);
      s.finish();
    }
  }

  const json* take(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ValidationError("config: unknown key " + (path_.empty() ? k : path_ + "." + k));
    }
  }

  [[noreturn]] void fail(const char* key, const std::string& msg) const {
    throw ValidationError("config: " + (path_.empty() ? std::string(key) : path_ + "." + key) + ": " + msg);
  }

 private:
  std::string where() const { return path_.empty() ? "top level" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

MatchMode parse_match_mode(const std::string& s) {
  if (s == "all-pairs") return MatchMode::AllPairs;
  if (s == "strict-iou") return MatchMode::StrictIou;
  throw ValidationError("config: evaluation.match_mode must be all-pairs or strict-iou, got " + s);
}

const char* match_mode_name(MatchMode m) { return m == MatchMode::AllPairs ? "all-pairs" : "strict-iou"; }

}  // namespace

void RunConfig::resolve() {
  pipeline.ingest.resolution = resolution;
  if (!dbscan_eps_set) pipeline.ingest.dbscan_eps = 2.0 * resolution;
  synth.scene.seed = seed;
}

void RunConfig::validate() const {
  if (!(resolution > 0.0)) throw ValidationError("config: resolution must be positive");
  pipeline.validate();
  if (evaluation.ks.empty()) throw ValidationError("config: evaluation.ks must not be empty");
  for (auto k : evaluation.ks)
    if (k == 0) throw ValidationError("config: evaluation.ks entries must be positive");
  synth.scene.validate();
  synth.noise.validate();
  if (synth.rooms_x < 1 || synth.rooms_y < 1) throw ValidationError("config: synth rooms must be >= 1");
  if (synth.frames < 1 || synth.frames_per_room < 1) throw ValidationError("config: synth frames must be >= 1");
  if (synth.width <= 0 || synth.height <= 0) throw ValidationError("config: synth image size must be positive");
  if (synth.width % synth.render.patch_size || synth.height % synth.render.patch_size)
    throw ValidationError("config: synth image size must be a multiple of the patch size");
  if (!(synth.hfov_deg > 0.0 && synth.hfov_deg < 180.0)) throw ValidationError("config: synth.hfov out of range");
  if (!(synth.orbit_radius > 0.0)) throw ValidationError("config: synth.radius must be positive");
  if (!(trajgen.cell_size > 0.0) || !(trajgen.margin >= 0.0) || !(trajgen.clearance >= 0.0))
    throw ValidationError("config: bad trajgen parameters");
  coverage.camera.validate();
  if (!(coverage.threshold_percent >= 0.0 && coverage.threshold_percent <= 100.0))
    throw ValidationError("config: coverage.threshold must be a percentage");
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config: not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section top(j, "");
  top.number("resolution", c.resolution);
  top.integer("seed", c.seed);
  top.child("paths", [&](Section& s) {
    s.text("input", c.input);
    s.text("output", c.output);
  });
  top.child("association", [&](Section& s) {
    auto& a = c.pipeline.association;
    s.number("tau_geo", a.tau_geo);
    s.number("tau_vis", a.tau_vis);
    s.number("margin", a.margin);
    s.integer("min_voxels", a.min_voxels);
  });
  top.child("mask_filter", [&](Section& s) {
    auto& m = c.pipeline.ingest.mask_filter;
    s.number("min_confidence", m.min_confidence);
    s.number("max_aspect", m.max_aspect);
    s.integer("min_area", m.min_area);
  });
  top.child("dbscan", [&](Section& s) {
    c.dbscan_eps_set = s.has("eps");
    s.number("eps", c.pipeline.ingest.dbscan_eps);
    s.integer("min_pts", c.pipeline.ingest.dbscan_min_pts);
  });
  top.child("depth_window", [&](Section& s) {
    s.number("min", c.pipeline.ingest.depth_window.min);
    s.number("max", c.pipeline.ingest.depth_window.max);
  });
  top.integer("normal_neighbors", c.pipeline.ingest.normal_neighbors);
  top.number("cover_min", c.pipeline.ingest.cover_min);
  top.child("evaluation", [&](Section& s) {
    s.number("d_assign", c.evaluation.d_assign);
    std::string mode = match_mode_name(c.evaluation.match_mode);
    s.text("match_mode", mode);
    c.evaluation.match_mode = parse_match_mode(mode);
    if (const json* ks = s.take("ks")) {
      if (!ks->is_array()) s.fail("ks", "expected an array");
      c.evaluation.ks.clear();
      for (const auto& k : *ks) {
        if (!k.is_number_unsigned()) s.fail("ks", "entries must be positive integers");
        c.evaluation.ks.push_back(k.get<std::size_t>());
      }
    }
  });
  top.child("synth", [&](Section& s) {
    auto& y = c.synth;
    s.integer("boxes", y.scene.boxes);
    s.integer("classes", y.scene.classes);
    s.number("room_size", y.scene.room_size);
    s.number("min_side", y.scene.min_side);
    s.number("max_side", y.scene.max_side);
    s.number("gap", y.scene.gap);
    s.integer("feature_dim", y.scene.feature_dim);
    s.integer("tracking_dim", y.scene.tracking_dim);
    s.integer("rooms_x", y.rooms_x);
    s.integer("rooms_y", y.rooms_y);
    s.number("room_spacing", y.room_spacing);
    s.integer("frames", y.frames);
    s.integer("frames_per_room", y.frames_per_room);
    s.integer("width", y.width);
    s.integer("height", y.height);
    s.number("hfov", y.hfov_deg);
    s.number("radius", y.orbit_radius);
    s.number("camera_height", y.camera_height);
    s.number("depth_sigma", y.noise.depth_sigma);
    s.number("feature_sigma", y.noise.feature_sigma);
    s.number("mask_dropout", y.noise.mask_dropout);
    s.number("max_depth", y.render.max_depth);
  });
  top.child("trajgen", [&](Section& s) {
    s.number("cell_size", c.trajgen.cell_size);
    s.number("margin", c.trajgen.margin);
    s.number("clearance", c.trajgen.clearance);
  });
  top.child("coverage", [&](Section& s) {
    s.integer("width", c.coverage.camera.width);
    s.integer("height", c.coverage.camera.height);
    s.number("hfov", c.coverage.camera.hfov_deg);
    s.number("max_range", c.coverage.camera.max_range);
    s.number("sensor_height", c.coverage.sensor_height);
    s.number("threshold", c.coverage.threshold_percent);
  });
  top.finish();
  c.resolve();
  c.validate();
  return c;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_json(const RunConfig& c) {
  const auto& in = c.pipeline.ingest;
  const auto& a = c.pipeline.association;
  const auto& y = c.synth;
  json j = {
      {"resolution", c.resolution},
      {"seed", c.seed},
      {"paths", {{"input", c.input}, {"output", c.output}}},
      {"association", {{"tau_geo", a.tau_geo}, {"tau_vis", a.tau_vis}, {"margin", a.margin}, {"min_voxels", a.min_voxels}}},
      {"mask_filter",
       {{"min_confidence", in.mask_filter.min_confidence},
        {"max_aspect", in.mask_filter.max_aspect},
        {"min_area", in.mask_filter.min_area}}},
      {"dbscan", {{"eps", in.dbscan_eps}, {"min_pts", in.dbscan_min_pts}}},
      {"depth_window", {{"min", in.depth_window.min}, {"max", in.depth_window.max}}},
      {"normal_neighbors", in.normal_neighbors},
      {"cover_min", in.cover_min},
      {"evaluation",
       {{"d_assign", c.evaluation.d_assign},
        {"match_mode", match_mode_name(c.evaluation.match_mode)},
        {"ks", c.evaluation.ks}}},
      {"synth",
       {{"boxes", y.scene.boxes},
        {"classes", y.scene.classes},
        {"room_size", y.scene.room_size},
        {"min_side", y.scene.min_side},
        {"max_side", y.scene.max_side},
        {"gap", y.scene.gap},
        {"feature_dim", y.scene.feature_dim},
        {"tracking_dim", y.scene.tracking_dim},
        {"rooms_x", y.rooms_x},
        {"rooms_y", y.rooms_y},
        {"room_spacing", y.room_spacing},
        {"frames", y.frames},
        {"frames_per_room", y.frames_per_room},
        {"width", y.width},
        {"height", y.height},
        {"hfov", y.hfov_deg},
        {"radius", y.orbit_radius},
        {"camera_height", y.camera_height},
        {"depth_sigma", y.noise.depth_sigma},
        {"feature_sigma", y.noise.feature_sigma},
        {"mask_dropout", y.noise.mask_dropout},
        {"max_depth", y.render.max_depth}}},
      {"trajgen", {{"cell_size", c.trajgen.cell_size}, {"margin", c.trajgen.margin}, {"clearance", c.trajgen.clearance}}},
      {"coverage",
       {{"width", c.coverage.camera.width},
        {"height", c.coverage.camera.height},
        {"hfov", c.coverage.camera.hfov_deg},
        {"max_range", c.coverage.camera.max_range},
        {"sensor_height", c.coverage.sensor_height},
        {"threshold", c.coverage.threshold_percent}}},
  };
  return j.dump(2);
}

}  // namespace openvox
