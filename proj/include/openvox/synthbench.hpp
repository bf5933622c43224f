#pragma once

// Deterministic box-world generator: scenes, rendered frames with masks and
// feature grids, camera trajectories and ground truth. Stands in for the
// segmentation and feature models so the whole pipeline can be tested.
//
// World frame is z-up. Cameras follow x right, y down, z forward, and pixel
// (u, v) maps to the ray ((u - cx) / fx, (v - cy) / fy, 1).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "openvox/coverage.hpp"
#include "openvox/frame.hpp"
#include "openvox/retrieval.hpp"
#include "openvox/trajgen.hpp"

namespace openvox {

struct SceneBox {
  std::uint64_t id = 0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d extents = Eigen::Vector3d::Ones();  // full side lengths
  int class_index = 0;
  int region = 0;

  Aabb bounds() const;
};

struct SyntheticScene {
  std::uint64_t seed = 0;
  std::vector<SceneBox> boxes;
  std::vector<std::string> class_names;
  int feature_dim = 0;
  std::vector<float> prototypes;  // classes x feature_dim, unit rows
  int tracking_dim = 0;
  std::vector<float> identities;  // boxes x tracking_dim, unit rows
  std::vector<float> background_feature;
  std::vector<float> background_tracking;
  Aabb room;

  std::size_t classes() const { return class_names.size(); }
  std::span<const float> prototype(int c) const {
    return {prototypes.data() + static_cast<std::size_t>(c) * feature_dim, static_cast<std::size_t>(feature_dim)};
  }
  std::span<const float> identity(std::size_t b) const {
    return {identities.data() + b * tracking_dim, static_cast<std::size_t>(tracking_dim)};
  }
  Eigen::Vector3d centroid() const;
  void validate() const;
};

struct NoiseModel {
  double depth_sigma = 0.0;    // meters
  double feature_sigma = 0.0;  // per dimension, before renormalization
  double mask_dropout = 0.0;   // probability a visible instance gets no mask

  void validate() const;
};

struct SceneConfig {
  std::uint64_t seed = 1;
  int boxes = 10;
  int classes = 10;
  double room_size = 4.0;  // square floor, meters
  double min_side = 0.3;
  double max_side = 0.8;
  double gap = 0.2;  // minimum clearance between boxes
  int feature_dim = 32;
  int tracking_dim = 32;

  void validate() const;
};

inline constexpr double kMaxPrototypeCosine = 0.2;

// Unit vectors with pairwise cosine <= kMaxPrototypeCosine: exact
// orthonormalization when count <= dim, rejection sampling otherwise.
std::vector<float> make_prototypes(std::uint64_t seed, int count, int dim);

// Non-overlapping boxes resting on the floor of one square room.
SyntheticScene generate_scene(const SceneConfig& config);

struct MultiRoomConfig {
  SceneConfig room;  // per-room layout; room.seed seeds the whole scene
  int rooms_x = 4;
  int rooms_y = 10;
  double spacing = 12.0;  // distance between room centers
};

// Rooms on a grid, ids and regions numbered row-major; every room shares
// the class prototypes.
SyntheticScene generate_multiroom_scene(const MultiRoomConfig& config);

struct RenderOptions {
  int patch_size = 14;
  int tracking_patch_size = 14;
  double max_depth = 8.0;  // sensor range, farther surfaces read as invalid
  float mask_confidence = 0.95f;
};

Intrinsics default_intrinsics(int width, int height, double hfov_deg = 90.0);

// Pose entries are rounded to f32 first so that a frame saved to disk and
// loaded again is identical to the in-memory one.
FrameRecord render_frame(const SyntheticScene& scene, const RigidPose& pose, const Intrinsics& intrinsics,
                         const NoiseModel& noise, std::int64_t frame_id, const RenderOptions& options = {});

RigidPose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target);
RigidPose round_to_f32(const RigidPose& pose);

// n poses on a horizontal circle around the scene centroid, height above it,
// aimed at the centroid. Pose k sits at angle 2 pi k / n.
std::vector<RigidPose> orbit_trajectory(const SyntheticScene& scene, int n_frames, double radius,
                                        double height = 0.8);
std::vector<RigidPose> orbit_around(const Eigen::Vector3d& center, int n_frames, double radius, double height);

// Orbits every region in turn, frames_per_room poses each.
std::vector<RigidPose> room_tour(const SyntheticScene& scene, int frames_per_room, double radius, double height);

// Key range [floor(min / r), floor(max / r)] per axis; the surface is the
// shell of that key box.
VoxelSet box_surface_voxels(const SceneBox& box, double resolution);

// Surface voxels of every box with class labels; points are voxel centers.
GroundTruth export_ground_truth(const SyntheticScene& scene, double resolution);

TextEmbeddingTable prototype_table(const SyntheticScene& scene);

CoverageScene coverage_scene(const SyntheticScene& scene, double resolution);

// Floor plan over the room bounds plus margin; a cell is occupied when its
// square meets a box footprint inflated by clearance.
OccupancyGrid occupancy_from_scene(const SyntheticScene& scene, double cell_size, double margin,
                                   double clearance);

void write_scene(const SyntheticScene& scene, const std::filesystem::path& path);
SyntheticScene read_scene(const std::filesystem::path& path);

struct BenchmarkLayout {
  std::filesystem::path root;
  std::string scene_file = "scene.json";
  std::string gt_dir = "gt";
  std::string table_file = "classes.json";
};

// Renders every pose into root/frames/NNNNNN and writes trajectory.json,
// the scene, ground truth and the prototype table next to it.
void write_benchmark(const SyntheticScene& scene, std::span<const RigidPose> poses, const Intrinsics& intrinsics,
                     const NoiseModel& noise, const RenderOptions& options, double gt_resolution,
                     const BenchmarkLayout& layout);

}  // namespace openvox
