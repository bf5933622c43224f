#include "openvox/ingest.hpp"

#include <algorithm>

namespace openvox {

void MaskFilterConfig::validate() const {
  if (!(min_confidence >= 0.0f && min_confidence <= 1.0f)) throw ValidationError("mask filter: min_confidence in [0,1]");
  if (!(max_aspect > 1.0)) throw ValidationError("mask filter: max_aspect must exceed 1");
}

void IngestConfig::validate() const {
  if (!(resolution > 0.0)) throw ValidationError("ingest: resolution must be positive");
  mask_filter.validate();
  if (!(depth_window.min < depth_window.max)) throw ValidationError("ingest: empty depth window");
  if (!(dbscan_eps > 0.0) || dbscan_min_pts < 1) throw ValidationError("ingest: bad DBSCAN parameters");
  if (normal_neighbors < 3) throw ValidationError("ingest: normal_neighbors must be >= 3");
}

double MaskStats::aspect() const {
  if (area == 0) return 0.0;
  const int lo = std::min(bbox_width, bbox_height);
  const int hi = std::max(bbox_width, bbox_height);
  return static_cast<double>(hi) / lo;
}

MaskStats mask_stats(std::span<const std::uint8_t> mask, int width, int height) {
  MaskStats s;
  int u0 = width, u1 = -1, v0 = height, v1 = -1;
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      if (!mask[static_cast<std::size_t>(v) * width + u]) continue;
      ++s.area;
      u0 = std::min(u0, u);
      u1 = std::max(u1, u);
      v0 = std::min(v0, v);
      v1 = std::max(v1, v);
    }
  }
  if (s.area) {
    s.bbox_width = u1 - u0 + 1;
    s.bbox_height = v1 - v0 + 1;
  }
  return s;
}

MaskFilterResult filter_masks(const FrameRecord& frame, const MaskFilterConfig& config) {
  MaskFilterResult result;
  for (std::size_t s = 0; s < frame.masks.size(); ++s) {
    const auto& mask = frame.masks[s];
    const int seg = static_cast<int>(s);
    if (mask.confidence < config.min_confidence) {
      result.dropped.push_back({seg, drop_reason::kLowConfidence});
      continue;
    }
    const MaskStats stats = mask_stats(mask.pixels, frame.intrinsics.width, frame.intrinsics.height);
    if (stats.area < config.min_area || stats.area == 0) {
      result.dropped.push_back({seg, drop_reason::kSmallArea});
      continue;
    }
    if (stats.aspect() > config.max_aspect) {
      result.dropped.push_back({seg, drop_reason::kExtremeAspect});
      continue;
    }
    result.kept.push_back(seg);
  }
  return result;
}

namespace {

// Coverage-weighted mean of the grid patches touched by the mask.
bool pool_tracking(const FeatureGrid& grid, const PatchCoverage& coverage, std::vector<float>& out) {
  std::vector<double> acc(grid.dim, 0.0);
  for (int i = 0; i < grid.rows; ++i) {
    for (int j = 0; j < grid.cols; ++j) {
      const float c = coverage.at(i, j);
      if (c <= 0.0f) continue;
      const auto f = grid.at(i, j);
      for (int d = 0; d < grid.dim; ++d) acc[d] += static_cast<double>(c) * f[d];
    }
  }
  out.assign(acc.begin(), acc.end());
  return normalize(out);
}

}  // namespace

IngestResult build_detections(const FrameRecord& frame, const IngestConfig& config) {
  frame.validate();
  config.validate();
  IngestResult result;
  auto filtered = filter_masks(frame, config.mask_filter);
  result.dropped = std::move(filtered.dropped);

  const DistinctivenessMap distinctiveness = compute_distinctiveness(frame.patch_grid);
  const Eigen::Vector3d camera = frame.pose.translation;
  const int height = frame.intrinsics.height;
  const int width = frame.intrinsics.width;

  for (const int seg : filtered.kept) {
    const auto& mask = frame.masks[seg].pixels;
    const PointCloud cloud = project_depth(mask, frame.depth, frame.intrinsics, frame.pose, config.depth_window);
    if (cloud.empty()) {
      result.dropped.push_back({seg, drop_reason::kNoValidDepth});
      continue;
    }
    const PointCloud denoised = dbscan_filter(cloud, config.dbscan_eps, config.dbscan_min_pts);
    if (denoised.empty()) {
      result.dropped.push_back({seg, drop_reason::kDbscanEmpty});
      continue;
    }
    Detection det;
    det.frame_id = frame.frame_id;
    det.segment = seg;
    det.voxels = voxelize(denoised, config.resolution);
    if (det.voxels.size() < 3) {
      result.dropped.push_back({seg, drop_reason::kTooFewVoxels});
      continue;
    }

    PointCloud centers;
    centers.points.reserve(det.voxels.size());
    for (const auto& k : det.voxels.keys()) centers.points.push_back(det.voxels.center(k).cast<float>());
    const int k = std::min<int>(config.normal_neighbors, static_cast<int>(centers.size()));
    const PointCloud oriented = estimate_normals(centers, k, camera);
    det.normals = oriented.normals;
    std::vector<Eigen::Vector3f> rays(centers.size());
    for (std::size_t v = 0; v < centers.size(); ++v) {
      rays[v] = (centers.points[v].cast<double>() - camera).normalized().cast<float>();
    }

    const PatchCoverage coverage =
        patch_coverage(mask, frame.patch_grid.rows, frame.patch_grid.cols, frame.patch_grid.patch_size);
    try {
      det.semantic.vector = aggregate_masked_feature(frame.patch_grid, distinctiveness, coverage, config.cover_min);
    } catch (const ValidationError&) {
      result.dropped.push_back({seg, drop_reason::kEmptyMask});
      continue;
    }
    const PatchCoverage tracking_cov =
        patch_coverage(mask, frame.tracking_grid.rows, frame.tracking_grid.cols, frame.tracking_grid.patch_size);
    if (!pool_tracking(frame.tracking_grid, tracking_cov, det.tracking)) {
      result.dropped.push_back({seg, drop_reason::kEmptyMask});
      continue;
    }

    const std::size_t area = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
    const float mean_d = mask_mean_distinctiveness(distinctiveness, coverage);
    det.breakdown = quality(s_size(area, height, width), s_angle(det.normals, rays),
                            s_sem(det.semantic.vector, frame.global_embedding), s_dist(mean_d));
    det.breakdown.mask_area = area;
    det.breakdown.mean_distinctiveness = mean_d;
    det.semantic.quality = det.breakdown.q;
    result.detections.push_back(std::move(det));
  }
  std::sort(result.dropped.begin(), result.dropped.end(),
            [](const SegmentDrop& a, const SegmentDrop& b) { return a.segment < b.segment; });
  return result;
}

}  // namespace openvox
