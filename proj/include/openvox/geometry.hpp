#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "openvox/error.hpp"

namespace openvox {

struct VoxelKey {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  auto operator<=>(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(k.x);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(k.y);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(k.z);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

// Key of the grid cell containing p at resolution r: floor(p / r) per axis.
VoxelKey voxel_key(const Eigen::Vector3d& p, double resolution);

struct Aabb {
  Eigen::Vector3d min = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d max = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());

  bool empty() const { return (min.array() > max.array()).any(); }
  void expand(const Eigen::Vector3d& p);
  void expand(const Aabb& other);
  Aabb inflated(double margin) const;
  bool intersects(const Aabb& other) const;
  bool contains(const Aabb& other) const;
  Eigen::Vector3d center() const { return 0.5 * (min + max); }
};

// Sorted, duplicate-free voxel keys at a fixed resolution.
class VoxelSet {
 public:
  VoxelSet() = default;
  explicit VoxelSet(double resolution);

  // Sorts and deduplicates.
  static VoxelSet from_keys(std::vector<VoxelKey> keys, double resolution);

  double resolution() const { return resolution_; }
  std::span<const VoxelKey> keys() const { return keys_; }
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }
  bool contains(const VoxelKey& key) const;

  Eigen::Vector3d center(const VoxelKey& key) const;
  // Tight bound over the voxel cubes, not just their centers.
  Aabb bounds() const;

  VoxelSet united(const VoxelSet& other) const;

  friend bool operator==(const VoxelSet&, const VoxelSet&) = default;

 private:
  std::vector<VoxelKey> keys_;
  double resolution_ = 0.0;
};

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;   // columns
  int height = 0;  // rows
};

// Camera-to-world rigid transform.
struct RigidPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidPose from_matrix(const Eigen::Matrix4d& m);
  Eigen::Matrix4d matrix() const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  // Throws ValidationError unless the rotation is orthonormal within 1e-5 with det +1.
  void validate() const;
};

struct DepthWindow {
  double min = 0.1;
  double max = 10.0;
};

struct PointCloud {
  std::vector<Eigen::Vector3f> points;
  std::vector<Eigen::Vector3f> normals;  // empty, or one per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }
};

// One world-frame point per mask pixel whose depth is finite and strictly
// inside the window. Pixel (u, v) is (column, row).
PointCloud project_depth(std::span<const std::uint8_t> mask, std::span<const float> depth,
                         const Intrinsics& intrinsics, const RigidPose& pose, const DepthWindow& window = {});

inline constexpr int kDbscanNoise = -1;

// Classic sequential DBSCAN labels (clusters numbered in discovery order,
// noise = -1). Neighborhoods are closed balls of radius eps and include the
// point itself. Neighbor search goes through a uniform grid of cell size eps.
std::vector<int> dbscan_labels(std::span<const Eigen::Vector3f> points, double eps, int min_pts);

// Keeps the largest cluster (lowest cluster label on ties). Normals, if
// present, are carried along.
PointCloud dbscan_filter(const PointCloud& cloud, double eps, int min_pts);

VoxelSet voxelize(std::span<const Eigen::Vector3f> points, double resolution);
inline VoxelSet voxelize(const PointCloud& cloud, double resolution) { return voxelize(cloud.points, resolution); }

// Local PCA normals from the k nearest neighbors (the point included),
// oriented so that n . (camera - p) >= 0. Rank-deficient neighborhoods get
// the unit vector from the point towards the camera.
PointCloud estimate_normals(const PointCloud& cloud, int k, const Eigen::Vector3d& camera);

struct VoxelOverlap {
  std::size_t intersection = 0;
  double iou = 0.0;
  double overlap_min = 0.0;
};

// Linear sorted merge, O(|a| + |b|).
VoxelOverlap voxel_overlap(const VoxelSet& a, const VoxelSet& b);

}  // namespace openvox
