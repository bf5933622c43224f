#pragma once

// One JSON file configures every command. Unknown keys are rejected at every
// level; omitted keys keep their defaults. The effective configuration is
// echoed into every report.

#include <filesystem>
#include <string>

#include "openvox/coverage.hpp"
#include "openvox/pipeline.hpp"
#include "openvox/synthbench.hpp"

namespace openvox {

struct SynthRunConfig {
  SceneConfig scene;
  int rooms_x = 1;
  int rooms_y = 1;
  double room_spacing = 12.0;
  int frames = 200;           // single room: orbit length
  int frames_per_room = 100;  // multi-room: frames per room
  int width = 224;
  int height = 224;
  double hfov_deg = 90.0;
  double orbit_radius = 2.5;
  double camera_height = 0.8;
  NoiseModel noise{0.01, 0.05, 0.0};
  RenderOptions render;

  bool multiroom() const { return rooms_x * rooms_y > 1; }
};

struct TrajgenRunConfig {
  double cell_size = 0.1;
  double margin = 0.5;     // floor plan extends this far past the room
  double clearance = 0.2;  // obstacles are inflated by this much
};

struct CoverageRunConfig {
  CameraModel camera;
  double sensor_height = kSensorHeight;
  double threshold_percent = 50.0;
};

struct RunConfig {
  double resolution = 0.05;
  std::uint64_t seed = 1;
  PipelineConfig pipeline;
  EvaluationConfig evaluation;
  SynthRunConfig synth;
  TrajgenRunConfig trajgen;
  CoverageRunConfig coverage;
  std::string input;
  std::string output;

  // Copies resolution and seed into the module configs that carry them.
  // DBSCAN eps follows resolution (2r) unless set explicitly.
  void resolve();
  void validate() const;

  bool dbscan_eps_set = false;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig read_run_config(const std::filesystem::path& path);
// Pretty-printed JSON of every field, in the same schema the parser reads.
std::string run_config_json(const RunConfig& config);

}  // namespace openvox
