#pragma once

// Map persistence. A snapshot is a directory:
//
//   map.json         resolution, config, config hash, per-instance scalars
//   voxels.dten      i32 [V, 3]   all instance voxel keys, concatenated
//   semantic.dten    f32 [N, Ds]  best semantic feature per instance
//   quality.dten     f32 [N]      quality of that feature
//   tracking.dten    f32 [N, Dt]
//
// Instances appear in ascending id order; voxel_count in map.json slices
// voxels.dten.

#include <filesystem>
#include <string>

#include "openvox/instance_map.hpp"

namespace openvox {

inline constexpr const char* kSnapshotIndexName = "map.json";

// FNV-1a 64 over the canonical JSON of the association config and resolution.
std::string config_hash(double resolution, const AssociationConfig& config);

void save_map(const InstanceMap& map, const std::filesystem::path& dir);
InstanceMap load_map(const std::filesystem::path& dir);

}  // namespace openvox
