#include "openvox/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include <Eigen/Geometry>

#include "json.hpp"
#include "openvox/tensor_io.hpp"

namespace openvox {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x0b0e5u};
  return std::mt19937_64(seq);
}

std::vector<double> gaussian_vector(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = n(rng);
  return v;
}

double norm_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<float> random_unit_rows(std::mt19937_64& rng, int count, int dim) {
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(count) * dim);
  for (int i = 0; i < count; ++i) {
    std::vector<double> v;
    double n = 0.0;
    while (n < 1e-6) {
      v = gaussian_vector(rng, dim);
      n = norm_of(v);
    }
    for (double x : v) out.push_back(static_cast<float>(x / n));
  }
  return out;
}

// Distance from p to the closest point of an AABB.
double distance_to_box(const Eigen::Vector3d& p, const Aabb& box) {
  const Eigen::Vector3d q = p.cwiseMax(box.min).cwiseMin(box.max);
  return (p - q).norm();
}

// Entry distance of the ray o + t d into the box, or infinity.
double ray_box_entry(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Aabb& box) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < box.min[a] || o[a] > box.max[a]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double ta = (box.min[a] - o[a]) / d[a];
    double tb = (box.max[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || t0 <= 0.0) return std::numeric_limits<double>::infinity();
  return t0;
}

std::vector<SceneBox> place_boxes(std::mt19937_64& rng, const SceneConfig& config, const Eigen::Vector2d& center,
                                  int region, std::uint64_t first_id) {
  std::uniform_real_distribution<double> side(config.min_side, config.max_side);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SceneBox> boxes;
  const double half_room = 0.5 * config.room_size;
  for (int i = 0; i < config.boxes; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      SceneBox b;
      b.id = first_id + static_cast<std::uint64_t>(i);
      b.region = region;
      b.class_index = i % config.classes;
      b.extents = Eigen::Vector3d(side(rng), side(rng), side(rng));
      const double sx = config.room_size - b.extents.x(), sy = config.room_size - b.extents.y();
      b.center = Eigen::Vector3d(center.x() - half_room + 0.5 * b.extents.x() + unit(rng) * sx,
                                 center.y() - half_room + 0.5 * b.extents.y() + unit(rng) * sy, 0.5 * b.extents.z());
      placed = std::all_of(boxes.begin(), boxes.end(), [&](const SceneBox& o) {
        const Eigen::Vector3d gap = (b.center - o.center).cwiseAbs() - 0.5 * (b.extents + o.extents);
        return gap.x() >= config.gap || gap.y() >= config.gap;
      });
      if (placed) boxes.push_back(b);
    }
    if (!placed) throw ValidationError("scene: could not place every box; enlarge the room or shrink the boxes");
  }
  return boxes;
}

void finish_scene(SyntheticScene& scene, const SceneConfig& config) {
  const auto vectors = make_prototypes(config.seed, config.classes + 1, config.feature_dim);
  scene.feature_dim = config.feature_dim;
  scene.prototypes.assign(vectors.begin(), vectors.begin() + static_cast<std::ptrdiff_t>(config.classes) * config.feature_dim);
  scene.background_feature.assign(vectors.end() - config.feature_dim, vectors.end());
  scene.class_names.clear();
  for (int c = 0; c < config.classes; ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "class_%02d", c);
    scene.class_names.push_back(name);
  }
  auto rng = make_rng(config.seed, 0x1d3471u);
  scene.tracking_dim = config.tracking_dim;
  scene.identities = random_unit_rows(rng, static_cast<int>(scene.boxes.size()), config.tracking_dim);
  scene.background_tracking = random_unit_rows(rng, 1, config.tracking_dim);
}

}  // namespace

Aabb SceneBox::bounds() const {
  Aabb b;
  b.min = center - 0.5 * extents;
  b.max = center + 0.5 * extents;
  return b;
}

Eigen::Vector3d SyntheticScene::centroid() const {
  if (boxes.empty()) return room.empty() ? Eigen::Vector3d::Zero() : room.center();
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& b : boxes) c += b.center;
  return c / static_cast<double>(boxes.size());
}

void SyntheticScene::validate() const {
  if (feature_dim <= 0 || tracking_dim <= 0) throw ValidationError("scene: feature dimensions must be positive");
  if (prototypes.size() != classes() * static_cast<std::size_t>(feature_dim)) {
    throw ValidationError("scene: prototype table does not match class count");
  }
  if (identities.size() != boxes.size() * static_cast<std::size_t>(tracking_dim)) {
    throw ValidationError("scene: identity table does not match box count");
  }
  if (background_feature.size() != static_cast<std::size_t>(feature_dim) ||
      background_tracking.size() != static_cast<std::size_t>(tracking_dim)) {
    throw ValidationError("scene: background vectors have the wrong size");
  }
  std::set<std::uint64_t> ids;
  for (const auto& b : boxes) {
    if (b.class_index < 0 || static_cast<std::size_t>(b.class_index) >= classes()) {
      throw ValidationError("scene: box class out of range");
    }
    if (!(b.extents.array() > 0.0).all()) throw ValidationError("scene: box extents must be positive");
    if (!ids.insert(b.id).second) throw ValidationError("scene: duplicate box id");
    if (!room.empty() && !room.inflated(1e-9).contains(b.bounds())) throw ValidationError("scene: box outside room");
  }
}

void NoiseModel::validate() const {
  if (!(depth_sigma >= 0.0) || !(feature_sigma >= 0.0)) throw ValidationError("noise: sigmas must be nonnegative");
  if (!(mask_dropout >= 0.0 && mask_dropout < 1.0)) throw ValidationError("noise: mask dropout must be in [0, 1)");
}

void SceneConfig::validate() const {
  if (boxes < 0 || classes <= 0) throw ValidationError("scene config: need at least one class");
  if (!(room_size > 0.0) || !(min_side > 0.0) || !(max_side >= min_side) || max_side > room_size) {
    throw ValidationError("scene config: bad room or box sizes");
  }
  if (!(gap >= 0.0)) throw ValidationError("scene config: gap must be nonnegative");
  if (feature_dim <= 0 || tracking_dim <= 0) throw ValidationError("scene config: feature dimensions must be positive");
}

std::vector<float> make_prototypes(std::uint64_t seed, int count, int dim) {
  if (count < 0 || dim <= 0) throw ValidationError("prototypes: bad shape");
  auto rng = make_rng(seed, 0x9207u);
  std::vector<std::vector<double>> rows;
  if (count <= dim) {
    // Modified Gram-Schmidt; a near-dependent draw is simply redrawn.
    while (static_cast<int>(rows.size()) < count) {
      auto v = gaussian_vector(rng, dim);
      for (const auto& r : rows) {
        double d = 0.0;
        for (int i = 0; i < dim; ++i) d += v[i] * r[i];
        for (int i = 0; i < dim; ++i) v[i] -= d * r[i];
      }
      const double n = norm_of(v);
      if (n < 1e-6) continue;
      for (auto& x : v) x /= n;
      rows.push_back(std::move(v));
    }
  } else {
    std::size_t attempts = 0;
    while (static_cast<int>(rows.size()) < count) {
      if (++attempts > 100000 * static_cast<std::size_t>(count)) {
        throw ValidationError("prototypes: cannot keep pairwise cosine <= 0.2 at this dimension");
      }
      auto v = gaussian_vector(rng, dim);
      const double n = norm_of(v);
      if (n < 1e-6) continue;
      for (auto& x : v) x /= n;
      const bool ok = std::all_of(rows.begin(), rows.end(), [&](const std::vector<double>& r) {
        double d = 0.0;
        for (int i = 0; i < dim; ++i) d += v[i] * r[i];
        return d <= kMaxPrototypeCosine;
      });
      if (ok) rows.push_back(std::move(v));
    }
  }
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(count) * dim);
  for (const auto& r : rows) {
    for (double x : r) out.push_back(static_cast<float>(x));
  }
  return out;
}

SyntheticScene generate_scene(const SceneConfig& config) {
  config.validate();
  SyntheticScene scene;
  scene.seed = config.seed;
  auto rng = make_rng(config.seed, 0xb0c5u);
  scene.boxes = place_boxes(rng, config, Eigen::Vector2d::Zero(), 0, 0);
  const double h = 0.5 * config.room_size;
  scene.room.min = Eigen::Vector3d(-h, -h, 0.0);
  scene.room.max = Eigen::Vector3d(h, h, config.max_side);
  finish_scene(scene, config);
  scene.validate();
  return scene;
}

SyntheticScene generate_multiroom_scene(const MultiRoomConfig& config) {
  config.room.validate();
  if (config.rooms_x <= 0 || config.rooms_y <= 0) throw ValidationError("multi-room: need at least one room");
  if (!(config.spacing >= config.room.room_size)) throw ValidationError("multi-room: rooms would overlap");
  SyntheticScene scene;
  scene.seed = config.room.seed;
  std::uint64_t next_id = 0;
  const double h = 0.5 * config.room.room_size;
  for (int iy = 0; iy < config.rooms_y; ++iy) {
    for (int ix = 0; ix < config.rooms_x; ++ix) {
      const int region = iy * config.rooms_x + ix;
      auto rng = make_rng(config.room.seed, 0x200000u + static_cast<std::uint64_t>(region));
      const Eigen::Vector2d center(ix * config.spacing, iy * config.spacing);
      auto boxes = place_boxes(rng, config.room, center, region, next_id);
      next_id += boxes.size();
      scene.boxes.insert(scene.boxes.end(), boxes.begin(), boxes.end());
      scene.room.expand(Eigen::Vector3d(center.x() - h, center.y() - h, 0.0));
      scene.room.expand(Eigen::Vector3d(center.x() + h, center.y() + h, config.room.max_side));
    }
  }
  finish_scene(scene, config.room);
  scene.validate();
  return scene;
}

Intrinsics default_intrinsics(int width, int height, double hfov_deg) {
  if (width <= 0 || height <= 0 || !(hfov_deg > 0.0 && hfov_deg < 180.0)) {
    throw ValidationError("intrinsics: bad image size or field of view");
  }
  Intrinsics k;
  k.width = width;
  k.height = height;
  k.fx = k.fy = 0.5 * width / std::tan(0.5 * hfov_deg * std::numbers::pi / 180.0);
  k.cx = 0.5 * width;
  k.cy = 0.5 * height;
  return k;
}

RigidPose round_to_f32(const RigidPose& pose) {
  RigidPose r;
  r.rotation = pose.rotation.cast<float>().cast<double>();
  r.translation = pose.translation.cast<float>().cast<double>();
  return r;
}

RigidPose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  if (!forward.allFinite()) throw ValidationError("look_at: eye and target coincide");
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  if (forward.cross(up).norm() < 1e-9) up = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d right = forward.cross(up).normalized();
  RigidPose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = forward.cross(right);
  pose.rotation.col(2) = forward;
  pose.translation = eye;
  return pose;
}

FrameRecord render_frame(const SyntheticScene& scene, const RigidPose& raw_pose, const Intrinsics& intrinsics,
                         const NoiseModel& noise, std::int64_t frame_id, const RenderOptions& options) {
  noise.validate();
  const int W = intrinsics.width, H = intrinsics.height;
  if (W <= 0 || H <= 0) throw ValidationError("render: empty image");
  if (options.patch_size <= 0 || W % options.patch_size || H % options.patch_size ||
      options.tracking_patch_size <= 0 || W % options.tracking_patch_size || H % options.tracking_patch_size) {
    throw ValidationError("render: patch sizes must tile the image");
  }
  const RigidPose pose = round_to_f32(raw_pose);
  pose.validate();
  auto rng = make_rng(scene.seed, 0x100000000ull + static_cast<std::uint64_t>(frame_id));

  const std::size_t P = static_cast<std::size_t>(W) * H;
  std::vector<double> zbuf(P, std::numeric_limits<double>::infinity());
  std::vector<int> owner(P, -1);
  const Eigen::Matrix3d world_to_cam = pose.rotation.transpose();
  for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
    const Aabb box = scene.boxes[b].bounds();
    if (distance_to_box(pose.translation, box) > options.max_depth) continue;
    int u0 = 0, u1 = W - 1, v0 = 0, v1 = H - 1;
    bool in_front = true, behind = true;
    double umin = std::numeric_limits<double>::infinity(), umax = -umin, vmin = umin, vmax = -umin;
    for (int c = 0; c < 8; ++c) {
      const Eigen::Vector3d corner((c & 1) ? box.max.x() : box.min.x(), (c & 2) ? box.max.y() : box.min.y(),
                                   (c & 4) ? box.max.z() : box.min.z());
      const Eigen::Vector3d pc = world_to_cam * (corner - pose.translation);
      in_front = in_front && pc.z() > 1e-3;
      behind = behind && pc.z() <= 0.0;
      if (pc.z() > 1e-3) {
        umin = std::min(umin, intrinsics.fx * pc.x() / pc.z() + intrinsics.cx);
        umax = std::max(umax, intrinsics.fx * pc.x() / pc.z() + intrinsics.cx);
        vmin = std::min(vmin, intrinsics.fy * pc.y() / pc.z() + intrinsics.cy);
        vmax = std::max(vmax, intrinsics.fy * pc.y() / pc.z() + intrinsics.cy);
      }
    }
    if (behind) continue;
    if (in_front) {
      // Pixel u sees the ray through (u - cx) / fx, so the box spans [umin, umax] in u directly.
      u0 = std::max(0, static_cast<int>(std::floor(umin)) - 1);
      u1 = std::min(W - 1, static_cast<int>(std::ceil(umax)) + 1);
      v0 = std::max(0, static_cast<int>(std::floor(vmin)) - 1);
      v1 = std::min(H - 1, static_cast<int>(std::ceil(vmax)) + 1);
    }
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        const Eigen::Vector3d ray_cam((u - intrinsics.cx) / intrinsics.fx, (v - intrinsics.cy) / intrinsics.fy, 1.0);
        // The camera-frame ray has unit z, so the entry parameter is the depth.
        const double t = ray_box_entry(pose.translation, pose.rotation * ray_cam, box);
        const std::size_t i = static_cast<std::size_t>(v) * W + u;
        if (t <= options.max_depth && t < zbuf[i]) {
          zbuf[i] = t;
          owner[i] = static_cast<int>(b);
        }
      }
    }
  }

  FrameRecord f;
  f.frame_id = frame_id;
  f.pose = pose;
  f.intrinsics = intrinsics;
  f.depth.assign(P, 0.0f);
  std::normal_distribution<double> depth_noise(0.0, noise.depth_sigma > 0 ? noise.depth_sigma : 1.0);
  for (std::size_t i = 0; i < P; ++i) {
    if (owner[i] < 0) continue;
    double d = zbuf[i];
    if (noise.depth_sigma > 0.0) d += depth_noise(rng);
    f.depth[i] = static_cast<float>(std::max(d, 0.0));
  }

  std::vector<std::size_t> visible(scene.boxes.size(), 0);
  for (const int o : owner) {
    if (o >= 0) ++visible[o];
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
    if (!visible[b]) continue;
    if (noise.mask_dropout > 0.0 && unit(rng) < noise.mask_dropout) continue;
    SegmentMask m;
    m.confidence = options.mask_confidence;
    m.pixels.assign(P, 0);
    for (std::size_t i = 0; i < P; ++i) m.pixels[i] = owner[i] == static_cast<int>(b) ? 1 : 0;
    f.masks.push_back(std::move(m));
  }

  // Pixel-share mixtures of per-owner vectors plus noise, renormalized.
  auto make_grid = [&](int patch, int dim, auto&& vector_of, std::span<const float> background) {
    FeatureGrid g;
    g.rows = H / patch;
    g.cols = W / patch;
    g.dim = dim;
    g.patch_size = patch;
    g.data.assign(g.patches() * dim, 0.0f);
    std::normal_distribution<double> feat_noise(0.0, noise.feature_sigma > 0 ? noise.feature_sigma : 1.0);
    std::map<int, int> counts;
    std::vector<double> acc(dim);
    const double share = 1.0 / (static_cast<double>(patch) * patch);
    for (int i = 0; i < g.rows; ++i) {
      for (int j = 0; j < g.cols; ++j) {
        counts.clear();
        for (int v = i * patch; v < (i + 1) * patch; ++v) {
          for (int u = j * patch; u < (j + 1) * patch; ++u) ++counts[owner[static_cast<std::size_t>(v) * W + u]];
        }
        std::fill(acc.begin(), acc.end(), 0.0);
        for (const auto& [o, n] : counts) {
          const std::span<const float> vec = o < 0 ? background : vector_of(o);
          for (int d = 0; d < dim; ++d) acc[d] += share * n * vec[d];
        }
        if (noise.feature_sigma > 0.0) {
          for (auto& x : acc) x += feat_noise(rng);
        }
        double n2 = 0.0;
        for (double x : acc) n2 += x * x;
        const double inv = n2 > 0.0 ? 1.0 / std::sqrt(n2) : 0.0;
        auto cell = g.at(i, j);
        for (int d = 0; d < dim; ++d) cell[d] = static_cast<float>(acc[d] * inv);
      }
    }
    return g;
  };
  f.patch_grid = make_grid(
      options.patch_size, scene.feature_dim,
      [&](int o) { return scene.prototype(scene.boxes[o].class_index); }, scene.background_feature);
  f.tracking_grid = make_grid(
      options.tracking_patch_size, scene.tracking_dim,
      [&](int o) { return scene.identity(static_cast<std::size_t>(o)); }, scene.background_tracking);

  std::vector<double> global(scene.feature_dim, 0.0);
  for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
    if (!visible[b]) continue;
    const auto p = scene.prototype(scene.boxes[b].class_index);
    for (int d = 0; d < scene.feature_dim; ++d) global[d] += static_cast<double>(visible[b]) * p[d];
  }
  const double gn = norm_of(global);
  if (gn > 0.0) {
    f.global_embedding.resize(scene.feature_dim);
    for (int d = 0; d < scene.feature_dim; ++d) f.global_embedding[d] = static_cast<float>(global[d] / gn);
  } else {
    f.global_embedding = scene.background_feature;
  }
  return f;
}

std::vector<RigidPose> orbit_around(const Eigen::Vector3d& center, int n_frames, double radius, double height) {
  if (n_frames <= 0) throw ValidationError("orbit: frame count must be positive");
  if (!(radius > 0.0)) throw ValidationError("orbit: radius must be positive");
  std::vector<RigidPose> poses;
  poses.reserve(n_frames);
  for (int k = 0; k < n_frames; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / n_frames;
    const Eigen::Vector3d eye = center + Eigen::Vector3d(radius * std::cos(theta), radius * std::sin(theta), height);
    poses.push_back(look_at(eye, center));
  }
  return poses;
}

std::vector<RigidPose> orbit_trajectory(const SyntheticScene& scene, int n_frames, double radius, double height) {
  return orbit_around(scene.centroid(), n_frames, radius, height);
}

std::vector<RigidPose> room_tour(const SyntheticScene& scene, int frames_per_room, double radius, double height) {
  std::map<int, std::pair<Eigen::Vector3d, int>> regions;
  for (const auto& b : scene.boxes) {
    auto& [sum, count] = regions.try_emplace(b.region, Eigen::Vector3d::Zero(), 0).first->second;
    sum += b.center;
    ++count;
  }
  std::vector<RigidPose> poses;
  for (const auto& [region, acc] : regions) {
    const auto orbit = orbit_around(acc.first / acc.second, frames_per_room, radius, height);
    poses.insert(poses.end(), orbit.begin(), orbit.end());
  }
  return poses;
}

VoxelSet box_surface_voxels(const SceneBox& box, double resolution) {
  if (!(resolution > 0.0)) throw ValidationError("surface voxels: resolution must be positive");
  const Aabb b = box.bounds();
  const VoxelKey lo = voxel_key(b.min, resolution);
  const VoxelKey hi = voxel_key(b.max, resolution);
  std::vector<VoxelKey> keys;
  for (int x = lo.x; x <= hi.x; ++x) {
    for (int y = lo.y; y <= hi.y; ++y) {
      const bool side = x == lo.x || x == hi.x || y == lo.y || y == hi.y;
      if (side) {
        for (int z = lo.z; z <= hi.z; ++z) keys.push_back({x, y, z});
      } else {
        keys.push_back({x, y, lo.z});
        if (hi.z != lo.z) keys.push_back({x, y, hi.z});
      }
    }
  }
  return VoxelSet::from_keys(std::move(keys), resolution);
}

GroundTruth export_ground_truth(const SyntheticScene& scene, double resolution) {
  GroundTruth gt;
  gt.resolution = resolution;
  for (const auto& box : scene.boxes) {
    GtInstance inst{box.id, box.class_index, box_surface_voxels(box, resolution)};
    for (const auto& k : inst.voxels.keys()) {
      gt.points.push_back(inst.voxels.center(k).cast<float>());
      gt.labels.push_back(box.class_index);
    }
    gt.instances.push_back(std::move(inst));
  }
  return gt;
}

TextEmbeddingTable prototype_table(const SyntheticScene& scene) {
  TextEmbeddingTable t;
  t.names = scene.class_names;
  t.dim = scene.feature_dim;
  t.embeddings = scene.prototypes;
  return t;
}

CoverageScene coverage_scene(const SyntheticScene& scene, double resolution) {
  CoverageScene out;
  out.resolution = resolution;
  for (const auto& box : scene.boxes) {
    out.instances.push_back({box.id, scene.class_names.at(box.class_index), box.region,
                             box_surface_voxels(box, resolution)});
  }
  return out;
}

OccupancyGrid occupancy_from_scene(const SyntheticScene& scene, double cell_size, double margin, double clearance) {
  if (!(cell_size > 0.0) || !(margin >= 0.0) || !(clearance >= 0.0)) {
    throw ValidationError("occupancy: cell size must be positive, margin and clearance nonnegative");
  }
  if (scene.room.empty()) throw ValidationError("occupancy: scene has no room bounds");
  OccupancyGrid g;
  g.cell_size = cell_size;
  g.origin = scene.room.min.head<2>() - Eigen::Vector2d::Constant(margin);
  const Eigen::Vector2d size = scene.room.max.head<2>() - scene.room.min.head<2>() + Eigen::Vector2d::Constant(2 * margin);
  g.width = static_cast<int>(std::ceil(size.x() / cell_size - 1e-9));
  g.height = static_cast<int>(std::ceil(size.y() / cell_size - 1e-9));
  g.occupied.assign(static_cast<std::size_t>(g.width) * g.height, 0);
  for (const auto& box : scene.boxes) {
    const Aabb b = box.bounds();
    const Eigen::Vector2d lo = b.min.head<2>() - Eigen::Vector2d::Constant(clearance);
    const Eigen::Vector2d hi = b.max.head<2>() + Eigen::Vector2d::Constant(clearance);
    const Cell c0 = g.cell_of(lo), c1 = g.cell_of(hi);
    for (int y = std::max(0, c0.y); y <= std::min(g.height - 1, c1.y); ++y) {
      for (int x = std::max(0, c0.x); x <= std::min(g.width - 1, c1.x); ++x) {
        // Strict overlap: touching an edge does not block the cell.
        const Eigen::Vector2d cmin = g.origin + cell_size * Eigen::Vector2d(x, y);
        const Eigen::Vector2d cmax = cmin + Eigen::Vector2d::Constant(cell_size);
        if ((cmin.array() < hi.array()).all() && (cmax.array() > lo.array()).all()) g.occupied[g.index(x, y)] = 1;
      }
    }
  }
  return g;
}

namespace {

json vec3(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3(const json& j) {
  const auto a = j.get<std::vector<double>>();
  if (a.size() != 3) throw FormatError("expected a 3-vector");
  return {a[0], a[1], a[2]};
}

}  // namespace

void write_scene(const SyntheticScene& scene, const fs::path& path) {
  scene.validate();
  json boxes = json::array();
  for (const auto& b : scene.boxes) {
    boxes.push_back({{"id", b.id}, {"center", vec3(b.center)}, {"extents", vec3(b.extents)},
                     {"class_index", b.class_index}, {"region", b.region}});
  }
  const json j = {{"format_version", kFormatVersion},
                  {"seed", scene.seed},
                  {"class_names", scene.class_names},
                  {"feature_dim", scene.feature_dim},
                  {"prototypes", scene.prototypes},
                  {"tracking_dim", scene.tracking_dim},
                  {"identities", scene.identities},
                  {"background_feature", scene.background_feature},
                  {"background_tracking", scene.background_tracking},
                  {"room", {{"min", vec3(scene.room.min)}, {"max", vec3(scene.room.max)}}},
                  {"boxes", boxes}};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text_file(path, j.dump() + "\n");
}

SyntheticScene read_scene(const fs::path& path) {
  SyntheticScene s;
  try {
    const json j = json::parse(read_text_file(path));
    if (j.at("format_version").get<int>() != kFormatVersion) throw FormatError("unsupported scene format version");
    s.seed = j.at("seed").get<std::uint64_t>();
    s.class_names = j.at("class_names").get<std::vector<std::string>>();
    s.feature_dim = j.at("feature_dim").get<int>();
    s.prototypes = j.at("prototypes").get<std::vector<float>>();
    s.tracking_dim = j.at("tracking_dim").get<int>();
    s.identities = j.at("identities").get<std::vector<float>>();
    s.background_feature = j.at("background_feature").get<std::vector<float>>();
    s.background_tracking = j.at("background_tracking").get<std::vector<float>>();
    s.room.min = vec3(j.at("room").at("min"));
    s.room.max = vec3(j.at("room").at("max"));
    for (const auto& b : j.at("boxes")) {
      SceneBox box;
      box.id = b.at("id").get<std::uint64_t>();
      box.center = vec3(b.at("center"));
      box.extents = vec3(b.at("extents"));
      box.class_index = b.at("class_index").get<int>();
      box.region = b.at("region").get<int>();
      s.boxes.push_back(box);
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  s.validate();
  return s;
}

void write_benchmark(const SyntheticScene& scene, std::span<const RigidPose> poses, const Intrinsics& intrinsics,
                     const NoiseModel& noise, const RenderOptions& options, double gt_resolution,
                     const BenchmarkLayout& layout) {
  fs::create_directories(layout.root);
  TrajectoryIndex index;
  index.scene_file = layout.scene_file;
  for (std::size_t k = 0; k < poses.size(); ++k) {
    const auto id = static_cast<std::int64_t>(k);
    const FrameRecord frame = render_frame(scene, poses[k], intrinsics, noise, id, options);
    index.frames.push_back(frame_dir_name(id));
    save_frame(frame, layout.root / index.frames.back());
  }
  write_trajectory_index(index, layout.root);
  write_scene(scene, layout.root / layout.scene_file);
  write_ground_truth(export_ground_truth(scene, gt_resolution), layout.root / layout.gt_dir);
  write_table(prototype_table(scene), layout.root / layout.table_file);
}

}  // namespace openvox
