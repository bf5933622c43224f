#include "openvox/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace openvox {

double CameraModel::focal() const {
  return 0.5 * width / std::tan(0.5 * hfov_deg * std::numbers::pi / 180.0);
}

void CameraModel::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("camera: empty image");
  if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) throw ValidationError("camera: hfov must be in (0, 180)");
  if (!(max_range > 0.0)) throw ValidationError("camera: max_range must be positive");
}

CameraPose agent_camera(const AgentPose& pose, double sensor_height) {
  const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
  CameraPose cam;
  cam.rotation.col(0) = Eigen::Vector3d(s, -c, 0.0);  // right
  cam.rotation.col(1) = Eigen::Vector3d(0.0, 0.0, -1.0);  // down
  cam.rotation.col(2) = Eigen::Vector3d(c, s, 0.0);  // forward
  cam.position = Eigen::Vector3d(pose.x, pose.y, sensor_height);
  return cam;
}

VoxelRaycaster::VoxelRaycaster(std::span<const VoxelKey> keys, double resolution) : resolution_(resolution) {
  if (!(resolution > 0.0)) throw ValidationError("raycaster: resolution must be positive");
  occupied_.reserve(keys.size());
  for (const auto& k : keys) {
    occupied_.insert(k);
    const Eigen::Vector3d lo(k.x * resolution, k.y * resolution, k.z * resolution);
    bounds_.expand(lo);
    bounds_.expand(Eigen::Vector3d(lo.array() + resolution));
  }
}

std::optional<RayHit> VoxelRaycaster::cast(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                                           double max_range) const {
  if (occupied_.empty()) return std::nullopt;
  const Eigen::Vector3d d = direction.normalized();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Clip the ray to the scene bounds.
  double t0 = 0.0, t1 = max_range;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (origin[a] < bounds_.min[a] || origin[a] > bounds_.max[a]) return std::nullopt;
      continue;
    }
    double ta = (bounds_.min[a] - origin[a]) / d[a];
    double tb = (bounds_.max[a] - origin[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return std::nullopt;

  const Eigen::Vector3d entry = origin + d * t0;
  int key[3], step[3], lo[3], hi[3];
  double t_max[3], t_delta[3];
  for (int a = 0; a < 3; ++a) {
    lo[a] = static_cast<int>(std::floor(bounds_.min[a] / resolution_ + 0.5));
    hi[a] = static_cast<int>(std::floor(bounds_.max[a] / resolution_ + 0.5)) - 1;
    key[a] = std::clamp(static_cast<int>(std::floor(entry[a] / resolution_)), lo[a], hi[a]);
    if (d[a] > 0.0) {
      step[a] = 1;
      t_max[a] = ((key[a] + 1) * resolution_ - origin[a]) / d[a];
      t_delta[a] = resolution_ / d[a];
    } else if (d[a] < 0.0) {
      step[a] = -1;
      t_max[a] = (key[a] * resolution_ - origin[a]) / d[a];
      t_delta[a] = -resolution_ / d[a];
    } else {
      step[a] = 0;
      t_max[a] = kInf;
      t_delta[a] = kInf;
    }
  }
  double t = t0;
  while (t <= t1) {
    const VoxelKey k{key[0], key[1], key[2]};
    if (occupied_.contains(k)) return RayHit{k, t};
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    t = t_max[axis];
    key[axis] += step[axis];
    if (key[axis] < lo[axis] || key[axis] > hi[axis]) break;
    t_max[axis] += t_delta[axis];
  }
  return std::nullopt;
}

CoverageReport coverage_analysis(const CoverageScene& scene, std::span<const CameraPose> poses,
                                 const CameraModel& camera, double object_threshold_percent) {
  camera.validate();
  std::vector<VoxelKey> all;
  for (const auto& inst : scene.instances) {
    if (!inst.voxels.empty() && std::abs(inst.voxels.resolution() - scene.resolution) > 1e-12) {
      throw ValidationError("coverage: instance resolution differs from the scene");
    }
    all.insert(all.end(), inst.voxels.keys().begin(), inst.voxels.keys().end());
  }
  const VoxelSet surface = VoxelSet::from_keys(std::move(all), scene.resolution);
  const VoxelRaycaster caster(surface.keys(), scene.resolution);

  const double f = camera.focal();
  std::unordered_set<VoxelKey, VoxelKeyHash> hit;
  for (const auto& pose : poses) {
    for (int v = 0; v < camera.height; ++v) {
      for (int u = 0; u < camera.width; ++u) {
        const Eigen::Vector3d ray((u + 0.5 - 0.5 * camera.width) / f, (v + 0.5 - 0.5 * camera.height) / f, 1.0);
        if (const auto h = caster.cast(pose.position, pose.rotation * ray, camera.max_range)) hit.insert(h->key);
      }
    }
  }

  CoverageReport report;
  report.poses = poses.size();
  report.object_threshold_percent = object_threshold_percent;
  report.surface_voxels = surface.size();
  report.covered_surface_voxels = hit.size();
  report.surface_coverage =
      surface.empty() ? 0.0 : static_cast<double>(hit.size()) / static_cast<double>(surface.size());
  std::size_t above = 0;
  for (const auto& inst : scene.instances) {
    CoverageRow row{inst.id, inst.category, inst.region, inst.voxels.size(), 0};
    for (const auto& k : inst.voxels.keys()) row.covered_voxels += hit.contains(k) ? 1 : 0;
    if (row.percent() > object_threshold_percent) ++above;
    report.rows.push_back(std::move(row));
  }
  report.covered_object_ratio =
      report.rows.empty() ? 0.0 : static_cast<double>(above) / static_cast<double>(report.rows.size());
  return report;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string coverage_csv(const CoverageReport& report) {
  std::ostringstream out;
  out << kCoverageCsvHeader << '\n';
  for (const auto& row : report.rows) {
    char pct[32];
    std::snprintf(pct, sizeof pct, "%.2f", row.percent());
    out << row.id << ',' << csv_field(row.category) << ',' << row.region << ',' << row.model_voxels << ','
        << row.covered_voxels << ',' << pct << '\n';
  }
  return out.str();
}

}  // namespace openvox
