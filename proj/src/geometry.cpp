#include "openvox/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace openvox {

VoxelKey voxel_key(const Eigen::Vector3d& p, double resolution) {
  return {static_cast<std::int32_t>(std::floor(p.x() / resolution)),
          static_cast<std::int32_t>(std::floor(p.y() / resolution)),
          static_cast<std::int32_t>(std::floor(p.z() / resolution))};
}

void Aabb::expand(const Eigen::Vector3d& p) {
  min = min.cwiseMin(p);
  max = max.cwiseMax(p);
}

void Aabb::expand(const Aabb& other) {
  if (other.empty()) return;
  min = min.cwiseMin(other.min);
  max = max.cwiseMax(other.max);
}

Aabb Aabb::inflated(double margin) const {
  if (empty()) return *this;
  return {min.array() - margin, max.array() + margin};
}

bool Aabb::intersects(const Aabb& other) const {
  if (empty() || other.empty()) return false;
  return (min.array() <= other.max.array()).all() && (other.min.array() <= max.array()).all();
}

bool Aabb::contains(const Aabb& other) const {
  if (other.empty()) return true;
  return (min.array() <= other.min.array()).all() && (other.max.array() <= max.array()).all();
}

VoxelSet::VoxelSet(double resolution) : resolution_(resolution) {
  if (!(resolution > 0.0)) throw ValidationError("voxel resolution must be positive");
}

VoxelSet VoxelSet::from_keys(std::vector<VoxelKey> keys, double resolution) {
  VoxelSet set(resolution);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  set.keys_ = std::move(keys);
  return set;
}

bool VoxelSet::contains(const VoxelKey& key) const { return std::binary_search(keys_.begin(), keys_.end(), key); }

Eigen::Vector3d VoxelSet::center(const VoxelKey& key) const {
  return {(key.x + 0.5) * resolution_, (key.y + 0.5) * resolution_, (key.z + 0.5) * resolution_};
}

Aabb VoxelSet::bounds() const {
  Aabb box;
  for (const auto& k : keys_) {
    const Eigen::Vector3d lo(k.x * resolution_, k.y * resolution_, k.z * resolution_);
    box.expand(lo);
    box.expand(Eigen::Vector3d(lo.array() + resolution_));
  }
  return box;
}

VoxelSet VoxelSet::united(const VoxelSet& other) const {
  if (other.resolution_ != resolution_) throw ValidationError("voxel set union: resolution mismatch");
  VoxelSet out(resolution_);
  out.keys_.reserve(keys_.size() + other.keys_.size());
  std::set_union(keys_.begin(), keys_.end(), other.keys_.begin(), other.keys_.end(), std::back_inserter(out.keys_));
  return out;
}

RigidPose RigidPose::from_matrix(const Eigen::Matrix4d& m) {
  RigidPose pose;
  pose.rotation = m.topLeftCorner<3, 3>();
  pose.translation = m.topRightCorner<3, 1>();
  return pose;
}

Eigen::Matrix4d RigidPose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

void RigidPose::validate() const {
  if (!rotation.allFinite() || !translation.allFinite()) throw ValidationError("pose has non-finite entries");
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-5) throw ValidationError("pose rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > 1e-5) throw ValidationError("pose rotation has det != +1");
}

PointCloud project_depth(std::span<const std::uint8_t> mask, std::span<const float> depth,
                         const Intrinsics& intrinsics, const RigidPose& pose, const DepthWindow& window) {
  pose.validate();
  const auto pixels = static_cast<std::size_t>(intrinsics.width) * static_cast<std::size_t>(intrinsics.height);
  if (mask.size() != depth.size() || depth.size() != pixels) {
    throw ValidationError("project_depth: mask, depth and intrinsics disagree on image size");
  }
  PointCloud cloud;
  for (int v = 0; v < intrinsics.height; ++v) {
    for (int u = 0; u < intrinsics.width; ++u) {
      const std::size_t idx = static_cast<std::size_t>(v) * intrinsics.width + u;
      if (!mask[idx]) continue;
      const double d = depth[idx];
      if (!std::isfinite(d) || d <= window.min || d >= window.max) continue;
      const Eigen::Vector3d cam(d * (u - intrinsics.cx) / intrinsics.fx, d * (v - intrinsics.cy) / intrinsics.fy, d);
      cloud.points.push_back(pose.apply(cam).cast<float>());
    }
  }
  return cloud;
}

namespace {

// Uniform grid over a point set, used for fixed-radius neighbor queries.
class RadiusGrid {
 public:
  RadiusGrid(std::span<const Eigen::Vector3f> points, double cell) : points_(points), cell_(cell) {
    order_.resize(points.size());
    std::vector<VoxelKey> keys(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      keys[i] = voxel_key(points[i].cast<double>(), cell_);
      order_[i] = static_cast<int>(i);
    }
    std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) { return keys[a] < keys[b]; });
    sorted_.reserve(order_.size());
    for (const int i : order_) sorted_.push_back(points[i].cast<double>());
    for (std::size_t i = 0; i < order_.size();) {
      std::size_t j = i;
      while (j < order_.size() && keys[order_[j]] == keys[order_[i]]) ++j;
      cells_.emplace(keys[order_[i]], std::pair{i, j});
      i = j;
    }
  }

  // Indices within distance radius (closed ball) of point idx, itself included.
  void neighbors(int idx, double radius, std::vector<int>& out) const {
    out.clear();
    const Eigen::Vector3d p = points_[idx].cast<double>();
    const VoxelKey c = voxel_key(p, cell_);
    const double r2 = radius * radius;
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == cells_.end()) continue;
          for (std::size_t s = it->second.first; s < it->second.second; ++s) {
            if ((sorted_[s] - p).squaredNorm() <= r2) out.push_back(order_[s]);
          }
        }
      }
    }
  }

 private:
  std::span<const Eigen::Vector3f> points_;
  double cell_;
  std::vector<int> order_;
  std::vector<Eigen::Vector3d> sorted_;  // points in cell order, for locality
  std::unordered_map<VoxelKey, std::pair<std::size_t, std::size_t>, VoxelKeyHash> cells_;
};

}  // namespace

std::vector<int> dbscan_labels(std::span<const Eigen::Vector3f> points, double eps, int min_pts) {
  if (!(eps > 0.0)) throw ValidationError("dbscan: eps must be positive");
  if (min_pts < 1) throw ValidationError("dbscan: min_pts must be >= 1");
  constexpr int kUnvisited = -2;
  std::vector<int> labels(points.size(), kUnvisited);
  if (points.empty()) return labels;

  const RadiusGrid grid(points, eps);
  std::vector<int> neighborhood;
  std::vector<int> seeds;
  int cluster = 0;
  for (std::size_t p = 0; p < points.size(); ++p) {
    if (labels[p] != kUnvisited) continue;
    grid.neighbors(static_cast<int>(p), eps, neighborhood);
    if (static_cast<int>(neighborhood.size()) < min_pts) {
      labels[p] = kDbscanNoise;
      continue;
    }
    labels[p] = cluster;
    // Labeling on enqueue yields the same labels as the textbook seed-set
    // loop without queuing a point twice: noise becomes a border point,
    // unvisited points are expanded exactly once.
    seeds.clear();
    auto claim = [&](int n) {
      if (labels[n] == kDbscanNoise) {
        labels[n] = cluster;
      } else if (labels[n] == kUnvisited) {
        labels[n] = cluster;
        seeds.push_back(n);
      }
    };
    for (const int n : neighborhood) claim(n);
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      grid.neighbors(seeds[s], eps, neighborhood);
      if (static_cast<int>(neighborhood.size()) >= min_pts) {
        for (const int n : neighborhood) claim(n);
      }
    }
    ++cluster;
  }
  return labels;
}

PointCloud dbscan_filter(const PointCloud& cloud, double eps, int min_pts) {
  const auto labels = dbscan_labels(cloud.points, eps, min_pts);
  int clusters = 0;
  for (int l : labels) clusters = std::max(clusters, l + 1);
  PointCloud out;
  if (clusters == 0) return out;
  std::vector<std::size_t> counts(clusters, 0);
  for (int l : labels) {
    if (l >= 0) ++counts[l];
  }
  const int keep = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  out.points.reserve(counts[keep]);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != keep) continue;
    out.points.push_back(cloud.points[i]);
    if (cloud.has_normals()) out.normals.push_back(cloud.normals[i]);
  }
  return out;
}

VoxelSet voxelize(std::span<const Eigen::Vector3f> points, double resolution) {
  if (!(resolution > 0.0)) throw ValidationError("voxelize: resolution must be positive");
  std::vector<VoxelKey> keys;
  keys.reserve(points.size());
  for (const auto& p : points) keys.push_back(voxel_key(p.cast<double>(), resolution));
  return VoxelSet::from_keys(std::move(keys), resolution);
}

PointCloud estimate_normals(const PointCloud& cloud, int k, const Eigen::Vector3d& camera) {
  const auto n = static_cast<int>(cloud.size());
  if (k < 3 || k > n) {
    throw ValidationError("estimate_normals: need N >= k >= 3 (N=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
  }
  PointCloud out;
  out.points = cloud.points;
  out.normals.resize(cloud.size());

  std::vector<std::pair<double, int>> dist(cloud.size());
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d p = cloud.points[i].cast<double>();
    for (int j = 0; j < n; ++j) dist[j] = {(cloud.points[j].cast<double>() - p).squaredNorm(), j};
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());

    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int m = 0; m < k; ++m) mean += cloud.points[dist[m].second].cast<double>();
    mean /= k;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int m = 0; m < k; ++m) {
      const Eigen::Vector3d d = cloud.points[dist[m].second].cast<double>() - mean;
      cov += d * d.transpose();
    }
    cov /= k;

    const Eigen::Vector3d to_camera = camera - p;
    Eigen::Vector3d normal;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const Eigen::Vector3d evals = solver.eigenvalues();  // ascending
    if (evals(1) <= 1e-12 * std::max(evals(2), 1e-300)) {
      normal = to_camera.normalized();
    } else {
      normal = solver.eigenvectors().col(0).normalized();
      if (normal.dot(to_camera) < 0.0) normal = -normal;
    }
    out.normals[i] = normal.cast<float>();
  }
  return out;
}

VoxelOverlap voxel_overlap(const VoxelSet& a, const VoxelSet& b) {
  if (a.resolution() != b.resolution()) throw ValidationError("voxel_overlap: resolution mismatch");
  const auto ka = a.keys();
  const auto kb = b.keys();
  std::size_t common = 0;
  auto ia = ka.begin();
  auto ib = kb.begin();
  while (ia != ka.end() && ib != kb.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  VoxelOverlap out;
  out.intersection = common;
  const std::size_t uni = ka.size() + kb.size() - common;
  const std::size_t smaller = std::min(ka.size(), kb.size());
  out.iou = uni ? static_cast<double>(common) / static_cast<double>(uni) : 0.0;
  out.overlap_min = smaller ? static_cast<double>(common) / static_cast<double>(smaller) : 0.0;
  return out;
}

}  // namespace openvox
