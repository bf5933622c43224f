#pragma once

// Ray-cast coverage of labeled ground-truth voxels along a trajectory.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "openvox/geometry.hpp"
#include "openvox/trajgen.hpp"

namespace openvox {

struct CoverageInstance {
  std::uint64_t id = 0;
  std::string category;
  int region = 0;
  VoxelSet voxels;
};

struct CoverageScene {
  double resolution = 0.05;
  std::vector<CoverageInstance> instances;
};

struct CameraModel {
  int width = 64;
  int height = 64;
  double hfov_deg = 90.0;
  double max_range = 10.0;

  double focal() const;  // pixels
  void validate() const;
};

// Camera-to-world: x right, y down, z forward.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

// Level camera at the agent position, sensor_height above the floor (z up).
CameraPose agent_camera(const AgentPose& pose, double sensor_height);

struct RayHit {
  VoxelKey key;
  double t = 0.0;  // distance along the unit ray where the voxel is entered
};

// First-hit voxel traversal (Amanatides-Woo) over the union of all instance
// voxels.
class VoxelRaycaster {
 public:
  VoxelRaycaster(std::span<const VoxelKey> keys, double resolution);

  std::optional<RayHit> cast(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction, double max_range) const;
  const Aabb& bounds() const { return bounds_; }
  std::size_t size() const { return occupied_.size(); }

 private:
  std::unordered_set<VoxelKey, VoxelKeyHash> occupied_;
  double resolution_;
  Aabb bounds_;
};

struct CoverageRow {
  std::uint64_t id = 0;
  std::string category;
  int region = 0;
  std::size_t model_voxels = 0;
  std::size_t covered_voxels = 0;
  double percent() const {
    return model_voxels ? 100.0 * static_cast<double>(covered_voxels) / static_cast<double>(model_voxels) : 0.0;
  }
};

struct CoverageReport {
  std::vector<CoverageRow> rows;
  std::size_t surface_voxels = 0;
  std::size_t covered_surface_voxels = 0;
  double surface_coverage = 0.0;      // fraction of distinct voxels hit
  double covered_object_ratio = 0.0;  // fraction of objects above the threshold
  double object_threshold_percent = 50.0;
  std::size_t poses = 0;
};

inline constexpr const char* kCoverageCsvHeader = "ID,Category,Region,Model Voxels,Covered Voxels,Coverage (%)";

// Casts one ray per pixel center from every pose; a voxel is covered once
// any ray hits it first.
CoverageReport coverage_analysis(const CoverageScene& scene, std::span<const CameraPose> poses,
                                 const CameraModel& camera, double object_threshold_percent = 50.0);

std::string coverage_csv(const CoverageReport& report);

}  // namespace openvox
