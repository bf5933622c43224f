#pragma once

#include <string>
#include <vector>

#include "openvox/frame.hpp"
#include "openvox/instance_map.hpp"

namespace openvox {

struct MaskFilterConfig {
  float min_confidence = 0.5f;
  double max_aspect = 10.0;
  std::size_t min_area = 400;  // pixels

  void validate() const;
};

struct IngestConfig {
  double resolution = 0.05;
  MaskFilterConfig mask_filter;
  DepthWindow depth_window;
  double dbscan_eps = 0.10;  // 2 x resolution
  int dbscan_min_pts = 8;
  int normal_neighbors = 8;
  float cover_min = kCoverMin;

  void validate() const;
};

// Stable, machine-readable reasons a segment produced no detection.
namespace drop_reason {
inline constexpr const char* kLowConfidence = "low confidence";
inline constexpr const char* kExtremeAspect = "extreme aspect ratio";
inline constexpr const char* kSmallArea = "insufficient area";
inline constexpr const char* kNoValidDepth = "no valid depth";
inline constexpr const char* kDbscanEmpty = "removed by dbscan";
inline constexpr const char* kTooFewVoxels = "too few voxels";
inline constexpr const char* kEmptyMask = "empty mask";
}  // namespace drop_reason

struct SegmentDrop {
  int segment = 0;
  std::string reason;
};

struct MaskStats {
  std::size_t area = 0;
  int bbox_width = 0;
  int bbox_height = 0;
  double aspect() const;  // long side / short side, 0 for empty masks
};

MaskStats mask_stats(std::span<const std::uint8_t> mask, int width, int height);

struct MaskFilterResult {
  std::vector<int> kept;  // segment indices, ascending
  std::vector<SegmentDrop> dropped;
};

// Keep iff confidence >= min, aspect <= max, area >= min (all inclusive).
MaskFilterResult filter_masks(const FrameRecord& frame, const MaskFilterConfig& config);

struct IngestResult {
  std::vector<Detection> detections;  // ordered by segment index
  std::vector<SegmentDrop> dropped;
};

// Per valid segment: project, denoise, voxelize, estimate voxel normals,
// aggregate the distinctiveness-weighted semantic feature with its quality
// breakdown, and pool the tracking feature. Per-segment failures become
// drops; only a malformed frame throws.
IngestResult build_detections(const FrameRecord& frame, const IngestConfig& config);

}  // namespace openvox
