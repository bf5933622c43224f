#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "openvox/bvh.hpp"
#include "openvox/geometry.hpp"
#include "openvox/semantics.hpp"

namespace openvox {

// A 3D segment observed in one frame.
struct Detection {
  VoxelSet voxels;
  std::vector<Eigen::Vector3f> normals;  // one per voxel
  SemanticFeature semantic;
  QualityBreakdown breakdown;
  std::vector<float> tracking;  // unit norm
  std::int64_t frame_id = 0;
  int segment = 0;  // index of the source mask in its frame
};

struct Instance {
  std::uint64_t id = 0;
  VoxelSet voxels;
  Aabb aabb;
  SemanticFeature semantic;
  std::vector<float> tracking;
  std::uint32_t obs_count = 1;
  std::int64_t last_seen = 0;
};

struct AssociationConfig {
  double tau_geo = 0.3;  // overlap_min threshold, (0, 1]
  double tau_vis = 0.8;  // tracking cosine threshold, (-1, 1]
  double margin = 0.1;   // broad-phase inflation, meters
  std::size_t min_voxels = 10;

  void validate() const;
};

struct FrameReport {
  std::int64_t frame_id = 0;
  std::size_t detections = 0;
  std::size_t matched = 0;
  std::size_t created = 0;
  std::size_t merged = 0;
  std::size_t active = 0;
  std::size_t instances = 0;
};

struct FinalReport {
  std::size_t merged = 0;
  std::size_t removed = 0;
  std::size_t instances = 0;
};

struct MapStats {
  std::size_t instances = 0;
  std::size_t voxels = 0;
  std::size_t memory_bytes = 0;
};

// Object-centric map. Single writer: associate_frame and finalize mutate;
// everything else is read-only.
class InstanceMap {
 public:
  explicit InstanceMap(double resolution, AssociationConfig config = {});

  // Broad phase over the BVH, exact voxel overlap, best-candidate matching
  // (largest detections first), then pairwise merging inside the active set
  // until no pair qualifies.
  FrameReport associate_frame(std::span<const Detection> detections, std::int64_t frame_id);

  // Global merge to fixpoint (ascending id pairs), then drops instances with
  // fewer than min_voxels voxels.
  FinalReport finalize();

  MapStats stats() const;

  // Merge evidence test: overlap_min >= tau_geo and tracking cosine >= tau_vis.
  bool qualifies(const Instance& a, const Instance& b) const;

  double resolution() const { return resolution_; }
  const AssociationConfig& config() const { return config_; }
  const std::map<std::uint64_t, Instance>& instances() const { return instances_; }
  const Instance* find(std::uint64_t id) const;
  const Bvh& bvh() const { return bvh_; }
  std::uint64_t next_id() const { return next_id_; }

  // Rebuilds a map from persisted instances (snapshot loading).
  static InstanceMap restore(double resolution, AssociationConfig config, std::vector<Instance> instances,
                             std::uint64_t next_id);

 private:
  void merge_into(Instance& survivor, const Instance& other);
  void rebuild_bvh();
  // One pass over ascending id pairs drawn from ids; returns merges done.
  std::size_t merge_pass(std::vector<std::uint64_t>& ids);

  double resolution_;
  AssociationConfig config_;
  std::map<std::uint64_t, Instance> instances_;
  Bvh bvh_;
  std::uint64_t next_id_ = 0;
};

Instance instance_from_detection(const Detection& detection, std::uint64_t id);

}  // namespace openvox
