#include "openvox/instance_map.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

namespace openvox {

namespace {

std::vector<float> weighted_tracking(std::span<const float> a, double wa, std::span<const float> b, double wb) {
  if (a.size() != b.size()) throw ValidationError("tracking features differ in dimension");
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<float>(wa * a[i] + wb * b[i]);
  if (!normalize(out)) {
    // Exactly opposite features; keep the heavier side.
    const auto& src = wa >= wb ? a : b;
    out.assign(src.begin(), src.end());
  }
  return out;
}

}  // namespace

void AssociationConfig::validate() const {
  if (!(tau_geo > 0.0 && tau_geo <= 1.0)) throw ValidationError("association: tau_geo must be in (0, 1]");
  if (!(tau_vis > -1.0 && tau_vis <= 1.0)) throw ValidationError("association: tau_vis must be in (-1, 1]");
  if (!(margin >= 0.0)) throw ValidationError("association: margin must be >= 0");
}

Instance instance_from_detection(const Detection& d, std::uint64_t id) {
  Instance inst;
  inst.id = id;
  inst.voxels = d.voxels;
  inst.aabb = d.voxels.bounds();
  inst.semantic = d.semantic;
  inst.tracking = d.tracking;
  inst.obs_count = 1;
  inst.last_seen = d.frame_id;
  return inst;
}

InstanceMap::InstanceMap(double resolution, AssociationConfig config) : resolution_(resolution), config_(config) {
  if (!(resolution > 0.0)) throw ValidationError("map resolution must be positive");
  config_.validate();
}

const Instance* InstanceMap::find(std::uint64_t id) const {
  const auto it = instances_.find(id);
  return it == instances_.end() ? nullptr : &it->second;
}

bool InstanceMap::qualifies(const Instance& a, const Instance& b) const {
  // Shared voxels imply touching cubes, so disjoint boxes cannot qualify.
  if (!a.aabb.intersects(b.aabb)) return false;
  if (voxel_overlap(a.voxels, b.voxels).overlap_min < config_.tau_geo) return false;
  return cosine(a.tracking, b.tracking) >= config_.tau_vis;
}

void InstanceMap::merge_into(Instance& survivor, const Instance& other) {
  survivor.voxels = survivor.voxels.united(other.voxels);
  survivor.aabb = survivor.voxels.bounds();
  survivor.tracking = weighted_tracking(survivor.tracking, survivor.obs_count, other.tracking, other.obs_count);
  survivor.semantic = fuse_semantic(survivor.semantic, other.semantic);
  survivor.obs_count += other.obs_count;
  survivor.last_seen = std::max(survivor.last_seen, other.last_seen);
}

void InstanceMap::rebuild_bvh() {
  std::vector<BvhItem> items;
  items.reserve(instances_.size());
  for (const auto& [id, inst] : instances_) items.push_back({id, inst.aabb});
  bvh_ = Bvh::build(std::move(items));
}

std::size_t InstanceMap::merge_pass(std::vector<std::uint64_t>& ids) {
  std::size_t merges = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto keep = instances_.find(ids[i]);
    if (keep == instances_.end()) continue;
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const auto other = instances_.find(ids[j]);
      if (other == instances_.end()) continue;
      if (!qualifies(keep->second, other->second)) continue;
      merge_into(keep->second, other->second);
      instances_.erase(other);
      ++merges;
    }
  }
  std::erase_if(ids, [this](std::uint64_t id) { return !instances_.contains(id); });
  return merges;
}

FrameReport InstanceMap::associate_frame(std::span<const Detection> detections, std::int64_t frame_id) {
  for (const auto& d : detections) {
    if (d.voxels.resolution() != resolution_) throw ValidationError("detection resolution differs from the map");
    if (d.voxels.empty()) throw ValidationError("detection has an empty voxel set");
  }
  FrameReport report;
  report.frame_id = frame_id;
  report.detections = detections.size();

  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].voxels.size() > detections[b].voxels.size();
  });

  std::set<std::uint64_t> active;
  // Instances grown or created this frame; their BVH boxes are stale or missing.
  std::vector<std::uint64_t> touched;

  for (const std::size_t di : order) {
    const Detection& det = detections[di];
    const Aabb box = det.voxels.bounds();
    std::vector<std::uint64_t> candidates = bvh_.query(box, config_.margin);
    const Aabb inflated = box.inflated(config_.margin);
    for (const auto id : touched) {
      if (instances_.at(id).aabb.intersects(inflated)) candidates.push_back(id);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    active.insert(candidates.begin(), candidates.end());

    Instance* best = nullptr;
    double best_overlap = -1.0;
    for (const auto id : candidates) {
      Instance& inst = instances_.at(id);
      const double overlap = voxel_overlap(det.voxels, inst.voxels).overlap_min;
      if (overlap < config_.tau_geo || overlap <= best_overlap) continue;
      if (cosine(det.tracking, inst.tracking) < config_.tau_vis) continue;
      best = &inst;
      best_overlap = overlap;
    }

    if (best != nullptr) {
      Instance observed = instance_from_detection(det, 0);
      observed.last_seen = frame_id;
      merge_into(*best, observed);
      touched.push_back(best->id);
      ++report.matched;
    } else {
      Instance inst = instance_from_detection(det, next_id_++);
      inst.last_seen = frame_id;
      const auto id = inst.id;
      instances_.emplace(id, std::move(inst));
      touched.push_back(id);
      active.insert(id);
      ++report.created;
    }
  }

  std::vector<std::uint64_t> ids(active.begin(), active.end());
  report.active = ids.size();
  while (const std::size_t merged = merge_pass(ids)) report.merged += merged;

  rebuild_bvh();
  report.instances = instances_.size();
  return report;
}

FinalReport InstanceMap::finalize() {
  FinalReport report;
  std::vector<std::uint64_t> ids;
  ids.reserve(instances_.size());
  for (const auto& [id, inst] : instances_) ids.push_back(id);
  while (const std::size_t merged = merge_pass(ids)) report.merged += merged;
  report.removed = std::erase_if(instances_, [this](const auto& kv) { return kv.second.voxels.size() < config_.min_voxels; });
  rebuild_bvh();
  report.instances = instances_.size();
  return report;
}

MapStats InstanceMap::stats() const {
  MapStats s;
  s.instances = instances_.size();
  for (const auto& [id, inst] : instances_) {
    s.voxels += inst.voxels.size();
    s.memory_bytes += sizeof(Instance) + inst.voxels.size() * sizeof(VoxelKey) +
                      (inst.semantic.vector.size() + inst.tracking.size()) * sizeof(float);
  }
  return s;
}

InstanceMap InstanceMap::restore(double resolution, AssociationConfig config, std::vector<Instance> instances,
                                 std::uint64_t next_id) {
  InstanceMap map(resolution, config);
  for (auto& inst : instances) {
    if (inst.voxels.resolution() != resolution) throw ValidationError("restore: instance resolution differs");
    if (inst.id >= next_id) throw ValidationError("restore: instance id " + std::to_string(inst.id) + " >= next_id");
    inst.aabb = inst.voxels.bounds();
    const auto id = inst.id;
    if (!map.instances_.emplace(id, std::move(inst)).second) throw ValidationError("restore: duplicate instance id");
  }
  map.next_id_ = next_id;
  map.rebuild_bvh();
  return map;
}

}  // namespace openvox
