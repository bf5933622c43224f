#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "openvox/geometry.hpp"
#include "openvox/semantics.hpp"

namespace openvox {

struct SegmentMask {
  std::vector<std::uint8_t> pixels;  // height x width, values in {0, 1}
  float confidence = 1.0f;
};

// One RGB-D observation after the (external) segmentation and feature
// extractors have run.
struct FrameRecord {
  std::int64_t frame_id = 0;
  RigidPose pose;
  Intrinsics intrinsics;
  std::vector<float> depth;  // height x width, meters, 0 = invalid
  std::vector<SegmentMask> masks;
  FeatureGrid patch_grid;     // semantic (vision-language) patch features
  FeatureGrid tracking_grid;  // appearance features used for association
  std::vector<float> global_embedding;

  std::size_t pixels() const {
    return static_cast<std::size_t>(intrinsics.width) * static_cast<std::size_t>(intrinsics.height);
  }
  // Throws ValidationError on any dimension inconsistency.
  void validate() const;
};

// On-disk description of a frame: frames/NNNNNN/frame.json.
struct FrameManifest {
  std::int64_t frame_id = 0;
  std::string pose_file = "pose.dten";
  std::string depth_file = "depth.dten";
  std::string masks_file = "masks.dten";
  std::vector<float> mask_confidences;
  std::string patch_grid_file = "patch_grid.dten";
  int patch_size = 14;
  std::string tracking_grid_file = "tracking_grid.dten";
  int tracking_patch_size = 14;
  std::string global_embedding_file = "global_embedding.dten";
  Intrinsics intrinsics;
};

inline constexpr const char* kFrameManifestName = "frame.json";
inline constexpr const char* kTrajectoryIndexName = "trajectory.json";
inline constexpr int kFormatVersion = 1;

FrameManifest read_manifest(const std::filesystem::path& frame_dir);
void write_manifest(const FrameManifest& manifest, const std::filesystem::path& frame_dir);

FrameRecord load_frame(const FrameManifest& manifest, const std::filesystem::path& frame_dir);
inline FrameRecord load_frame(const std::filesystem::path& frame_dir) {
  return load_frame(read_manifest(frame_dir), frame_dir);
}
// Writes the tensors and frame.json into frame_dir (created if missing).
void save_frame(const FrameRecord& frame, const std::filesystem::path& frame_dir);

// trajectory.json: ordered list of frame directories relative to the root.
struct TrajectoryIndex {
  std::vector<std::string> frames;
  std::string scene_file;  // optional, relative
};

std::string frame_dir_name(std::int64_t frame_id);
TrajectoryIndex read_trajectory_index(const std::filesystem::path& root);
void write_trajectory_index(const TrajectoryIndex& index, const std::filesystem::path& root);

}  // namespace openvox
