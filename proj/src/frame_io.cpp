#include <array>
#include <cstdio>
#include <utility>

#include "json.hpp"
#include "openvox/frame.hpp"
#include "openvox/tensor_io.hpp"

namespace openvox {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(where + ": bad value for '" + key + "': " + e.what());
  }
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Tensor read_part(const fs::path& dir, const std::string& name) {
  const fs::path p = dir / name;
  if (!fs::exists(p)) throw IoError("missing file " + p.string());
  return read_tensor(p);
}

FeatureGrid grid_from_tensor(const Tensor& t, int patch_size, const Intrinsics& intr, const char* what) {
  if (t.dtype() != DType::F32 || t.ndim() != 3) throw ValidationError(std::string(what) + ": expected f32 [Hp,Wp,D]");
  FeatureGrid g;
  g.rows = static_cast<int>(t.dims()[0]);
  g.cols = static_cast<int>(t.dims()[1]);
  g.dim = static_cast<int>(t.dims()[2]);
  g.patch_size = patch_size;
  if (g.image_height() != intr.height || g.image_width() != intr.width) {
    throw ValidationError(std::string(what) + ": " + std::to_string(g.rows) + "x" + std::to_string(g.cols) +
                          " patches of " + std::to_string(patch_size) + " px do not tile a " +
                          std::to_string(intr.height) + "x" + std::to_string(intr.width) + " image");
  }
  g.data.assign(t.f32().begin(), t.f32().end());
  return g;
}

Tensor grid_to_tensor(const FeatureGrid& g) {
  return Tensor::from_f32({static_cast<std::uint32_t>(g.rows), static_cast<std::uint32_t>(g.cols),
                           static_cast<std::uint32_t>(g.dim)},
                          g.data);
}

}  // namespace

void FrameRecord::validate() const {
  pose.validate();
  if (intrinsics.width <= 0 || intrinsics.height <= 0) throw ValidationError("frame: image size must be positive");
  if (depth.size() != pixels()) throw ValidationError("frame: depth does not match image size");
  for (const auto& m : masks) {
    if (m.pixels.size() != pixels()) throw ValidationError("frame: mask does not match image size");
  }
  for (const FeatureGrid* g : {&patch_grid, &tracking_grid}) {
    g->validate();
    if (g->image_height() != intrinsics.height || g->image_width() != intrinsics.width) {
      throw ValidationError("frame: feature grid does not tile the image");
    }
  }
  if (static_cast<int>(global_embedding.size()) != patch_grid.dim) {
    throw ValidationError("frame: global embedding dimension differs from patch features");
  }
}

FrameManifest read_manifest(const fs::path& frame_dir) {
  const fs::path path = frame_dir / kFrameManifestName;
  if (!fs::exists(path)) throw IoError("missing manifest " + path.string());
  const json j = parse_json_file(path);
  const std::string where = path.string();
  FrameManifest m;
  m.frame_id = require<std::int64_t>(j, "frame_id", where);
  m.pose_file = require<std::string>(j, "pose_file", where);
  m.depth_file = require<std::string>(j, "depth_file", where);
  m.masks_file = require<std::string>(j, "masks_file", where);
  m.mask_confidences = require<std::vector<float>>(j, "mask_confidences", where);
  m.patch_grid_file = require<std::string>(j, "patch_grid_file", where);
  m.patch_size = require<int>(j, "patch_size", where);
  m.tracking_grid_file = require<std::string>(j, "tracking_grid_file", where);
  m.tracking_patch_size = require<int>(j, "tracking_patch_size", where);
  m.global_embedding_file = require<std::string>(j, "global_embedding_file", where);
  const json intr = require<json>(j, "intrinsics", where);
  m.intrinsics.fx = require<double>(intr, "fx", where);
  m.intrinsics.fy = require<double>(intr, "fy", where);
  m.intrinsics.cx = require<double>(intr, "cx", where);
  m.intrinsics.cy = require<double>(intr, "cy", where);
  m.intrinsics.width = require<int>(intr, "width", where);
  m.intrinsics.height = require<int>(intr, "height", where);
  if (m.intrinsics.width <= 0 || m.intrinsics.height <= 0) throw ValidationError(where + ": image size must be positive");
  if (m.patch_size <= 0 || m.tracking_patch_size <= 0) throw ValidationError(where + ": patch size must be positive");
  return m;
}

void write_manifest(const FrameManifest& m, const fs::path& frame_dir) {
  json j;
  j["frame_id"] = m.frame_id;
  j["pose_file"] = m.pose_file;
  j["depth_file"] = m.depth_file;
  j["masks_file"] = m.masks_file;
  j["mask_confidences"] = m.mask_confidences;
  j["patch_grid_file"] = m.patch_grid_file;
  j["patch_size"] = m.patch_size;
  j["tracking_grid_file"] = m.tracking_grid_file;
  j["tracking_patch_size"] = m.tracking_patch_size;
  j["global_embedding_file"] = m.global_embedding_file;
  j["intrinsics"] = {{"fx", m.intrinsics.fx}, {"fy", m.intrinsics.fy}, {"cx", m.intrinsics.cx},
                     {"cy", m.intrinsics.cy}, {"width", m.intrinsics.width}, {"height", m.intrinsics.height}};
  write_text_file(frame_dir / kFrameManifestName, j.dump(2) + "\n");
}

FrameRecord load_frame(const FrameManifest& m, const fs::path& dir) {
  FrameRecord f;
  f.frame_id = m.frame_id;
  f.intrinsics = m.intrinsics;
  const auto h = static_cast<std::uint32_t>(m.intrinsics.height);
  const auto w = static_cast<std::uint32_t>(m.intrinsics.width);

  const Tensor pose = read_part(dir, m.pose_file);
  pose.expect_shape(DType::F32, std::array<std::uint32_t, 2>{4, 4}, "pose");
  Eigen::Matrix4d mat;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) mat(r, c) = pose.f32()[r * 4 + c];
  f.pose = RigidPose::from_matrix(mat);

  const Tensor depth = read_part(dir, m.depth_file);
  depth.expect_shape(DType::F32, std::array<std::uint32_t, 2>{h, w}, "depth");
  f.depth.assign(depth.f32().begin(), depth.f32().end());

  const Tensor masks = read_part(dir, m.masks_file);
  if (masks.dtype() != DType::U8 || masks.ndim() != 3 || masks.dims()[1] != h || masks.dims()[2] != w) {
    throw ValidationError("masks: expected u8 [S," + std::to_string(h) + "," + std::to_string(w) + "]");
  }
  const std::size_t segments = masks.dims()[0];
  if (m.mask_confidences.size() != segments) throw ValidationError("masks: confidence count differs from mask count");
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t s = 0; s < segments; ++s) {
    SegmentMask mask;
    const auto src = masks.u8().subspan(s * plane, plane);
    mask.pixels.assign(src.begin(), src.end());
    for (auto v : mask.pixels) {
      if (v > 1) throw ValidationError("masks: values must be 0 or 1");
    }
    mask.confidence = m.mask_confidences[s];
    f.masks.push_back(std::move(mask));
  }

  f.patch_grid = grid_from_tensor(read_part(dir, m.patch_grid_file), m.patch_size, m.intrinsics, "patch grid");
  f.tracking_grid =
      grid_from_tensor(read_part(dir, m.tracking_grid_file), m.tracking_patch_size, m.intrinsics, "tracking grid");

  const Tensor global = read_part(dir, m.global_embedding_file);
  if (global.dtype() != DType::F32 || global.ndim() != 1) throw ValidationError("global embedding: expected f32 [D]");
  f.global_embedding.assign(global.f32().begin(), global.f32().end());

  f.validate();
  return f;
}

void save_frame(const FrameRecord& f, const fs::path& dir) {
  f.validate();
  fs::create_directories(dir);
  FrameManifest m;
  m.frame_id = f.frame_id;
  m.intrinsics = f.intrinsics;
  m.patch_size = f.patch_grid.patch_size;
  m.tracking_patch_size = f.tracking_grid.patch_size;

  std::array<float, 16> pose{};
  const Eigen::Matrix4d mat = f.pose.matrix();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) pose[r * 4 + c] = static_cast<float>(mat(r, c));
  write_tensor(Tensor::from_f32({4, 4}, pose), dir / m.pose_file);

  const auto h = static_cast<std::uint32_t>(f.intrinsics.height);
  const auto w = static_cast<std::uint32_t>(f.intrinsics.width);
  write_tensor(Tensor::from_f32({h, w}, f.depth), dir / m.depth_file);

  Tensor masks(DType::U8, {static_cast<std::uint32_t>(f.masks.size()), h, w});
  for (std::size_t s = 0; s < f.masks.size(); ++s) {
    std::copy(f.masks[s].pixels.begin(), f.masks[s].pixels.end(), masks.u8().begin() + s * f.pixels());
    m.mask_confidences.push_back(f.masks[s].confidence);
  }
  write_tensor(masks, dir / m.masks_file);
  write_tensor(grid_to_tensor(f.patch_grid), dir / m.patch_grid_file);
  write_tensor(grid_to_tensor(f.tracking_grid), dir / m.tracking_grid_file);
  write_tensor(Tensor::from_f32({static_cast<std::uint32_t>(f.global_embedding.size())}, f.global_embedding),
               dir / m.global_embedding_file);
  write_manifest(m, dir);
}

std::string frame_dir_name(std::int64_t frame_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(frame_id));
  return std::string("frames/") + buf;
}

TrajectoryIndex read_trajectory_index(const fs::path& root) {
  const fs::path path = root / kTrajectoryIndexName;
  if (!fs::exists(path)) throw IoError("missing trajectory index " + path.string());
  const json j = parse_json_file(path);
  const std::string where = path.string();
  const int version = require<int>(j, "format_version", where);
  if (version != kFormatVersion) throw FormatError(where + ": unsupported format_version " + std::to_string(version));
  TrajectoryIndex index;
  index.frames = require<std::vector<std::string>>(j, "frames", where);
  if (j.contains("scene_file")) index.scene_file = j.at("scene_file").get<std::string>();
  return index;
}

void write_trajectory_index(const TrajectoryIndex& index, const fs::path& root) {
  json j;
  j["format_version"] = kFormatVersion;
  j["frames"] = index.frames;
  if (!index.scene_file.empty()) j["scene_file"] = index.scene_file;
  fs::create_directories(root);
  write_text_file(root / kTrajectoryIndexName, j.dump(2) + "\n");
}

}  // namespace openvox
