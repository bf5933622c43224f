#include "openvox/snapshot.hpp"

#include <cstdio>

#include "json.hpp"
#include "openvox/tensor_io.hpp"

namespace openvox {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json config_json(double resolution, const AssociationConfig& c) {
  return {{"resolution", resolution},
          {"tau_geo", c.tau_geo},
          {"tau_vis", c.tau_vis},
          {"margin", c.margin},
          {"min_voxels", c.min_voxels}};
}

}  // namespace

std::string config_hash(double resolution, const AssociationConfig& config) {
  const std::string text = config_json(resolution, config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_map(const InstanceMap& map, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& instances = map.instances();
  const std::size_t n = instances.size();
  std::size_t semantic_dim = 0;
  std::size_t tracking_dim = 0;
  std::size_t total_voxels = 0;
  for (const auto& [id, inst] : instances) {
    if (semantic_dim == 0) {
      semantic_dim = inst.semantic.vector.size();
      tracking_dim = inst.tracking.size();
    }
    if (inst.semantic.vector.size() != semantic_dim || inst.tracking.size() != tracking_dim) {
      throw InvariantError("save_map: instances disagree on feature dimensions");
    }
    total_voxels += inst.voxels.size();
  }

  std::vector<std::int32_t> voxels;
  voxels.reserve(3 * total_voxels);
  std::vector<float> semantic;
  semantic.reserve(n * semantic_dim);
  std::vector<float> quality;
  std::vector<float> tracking;
  tracking.reserve(n * tracking_dim);
  json rows = json::array();
  for (const auto& [id, inst] : instances) {
    for (const auto& k : inst.voxels.keys()) voxels.insert(voxels.end(), {k.x, k.y, k.z});
    semantic.insert(semantic.end(), inst.semantic.vector.begin(), inst.semantic.vector.end());
    quality.push_back(inst.semantic.quality);
    tracking.insert(tracking.end(), inst.tracking.begin(), inst.tracking.end());
    rows.push_back({{"id", inst.id},
                    {"obs_count", inst.obs_count},
                    {"last_seen", inst.last_seen},
                    {"voxel_count", inst.voxels.size()}});
  }

  const auto u32 = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
  write_tensor(Tensor::from_i32({u32(total_voxels), 3}, voxels), dir / "voxels.dten");
  write_tensor(Tensor::from_f32({u32(n), u32(semantic_dim)}, semantic), dir / "semantic.dten");
  write_tensor(Tensor::from_f32({u32(n)}, quality), dir / "quality.dten");
  write_tensor(Tensor::from_f32({u32(n), u32(tracking_dim)}, tracking), dir / "tracking.dten");

  json index;
  index["format_version"] = 1;
  index["resolution"] = map.resolution();
  index["config"] = config_json(map.resolution(), map.config());
  index["config_hash"] = config_hash(map.resolution(), map.config());
  index["next_id"] = map.next_id();
  index["instances"] = std::move(rows);
  write_text_file(dir / kSnapshotIndexName, index.dump(2) + "\n");
}

InstanceMap load_map(const fs::path& dir) {
  const fs::path index_path = dir / kSnapshotIndexName;
  if (!fs::exists(index_path)) throw IoError("missing map snapshot " + index_path.string());
  json index;
  try {
    index = json::parse(read_text_file(index_path));
  } catch (const json::parse_error& e) {
    throw FormatError(index_path.string() + ": " + e.what());
  }

  try {
    if (index.at("format_version").get<int>() != 1) throw FormatError("map snapshot: unsupported format_version");
    const double resolution = index.at("resolution").get<double>();
    const json& cfg = index.at("config");
    AssociationConfig config;
    config.tau_geo = cfg.at("tau_geo").get<double>();
    config.tau_vis = cfg.at("tau_vis").get<double>();
    config.margin = cfg.at("margin").get<double>();
    config.min_voxels = cfg.at("min_voxels").get<std::size_t>();
    if (index.at("config_hash").get<std::string>() != config_hash(resolution, config)) {
      throw CorruptionError("map snapshot: config hash mismatch");
    }

    const Tensor voxels = read_tensor(dir / "voxels.dten");
    const Tensor semantic = read_tensor(dir / "semantic.dten");
    const Tensor quality = read_tensor(dir / "quality.dten");
    const Tensor tracking = read_tensor(dir / "tracking.dten");
    const json& rows = index.at("instances");
    const std::size_t n = rows.size();
    if (voxels.dtype() != DType::I32 || voxels.ndim() != 2 || voxels.dims()[1] != 3) {
      throw CorruptionError("map snapshot: voxels.dten must be i32 [V,3]");
    }
    if (semantic.dtype() != DType::F32 || semantic.ndim() != 2 || semantic.dims()[0] != n ||
        tracking.dtype() != DType::F32 || tracking.ndim() != 2 || tracking.dims()[0] != n ||
        quality.dtype() != DType::F32 || quality.ndim() != 1 || quality.dims()[0] != n) {
      throw CorruptionError("map snapshot: feature tensors disagree with instance count");
    }
    const std::size_t ds = semantic.dims()[1];
    const std::size_t dt = tracking.dims()[1];

    std::vector<Instance> instances;
    instances.reserve(n);
    std::size_t cursor = 0;
    const auto keys = voxels.i32();
    for (std::size_t i = 0; i < n; ++i) {
      const json& row = rows[i];
      Instance inst;
      inst.id = row.at("id").get<std::uint64_t>();
      inst.obs_count = row.at("obs_count").get<std::uint32_t>();
      inst.last_seen = row.at("last_seen").get<std::int64_t>();
      const auto count = row.at("voxel_count").get<std::size_t>();
      if (cursor + count > voxels.dims()[0]) throw CorruptionError("map snapshot: voxel counts overrun voxels.dten");
      std::vector<VoxelKey> ks(count);
      for (std::size_t v = 0; v < count; ++v) {
        const std::size_t o = 3 * (cursor + v);
        ks[v] = {keys[o], keys[o + 1], keys[o + 2]};
      }
      cursor += count;
      inst.voxels = VoxelSet::from_keys(std::move(ks), resolution);
      if (inst.voxels.size() != count) throw CorruptionError("map snapshot: duplicate voxels in an instance");
      inst.semantic.vector.assign(semantic.f32().begin() + i * ds, semantic.f32().begin() + (i + 1) * ds);
      inst.semantic.quality = quality.f32()[i];
      inst.tracking.assign(tracking.f32().begin() + i * dt, tracking.f32().begin() + (i + 1) * dt);
      instances.push_back(std::move(inst));
    }
    if (cursor != voxels.dims()[0]) throw CorruptionError("map snapshot: trailing voxels in voxels.dten");
    return InstanceMap::restore(resolution, config, std::move(instances), index.at("next_id").get<std::uint64_t>());
  } catch (const json::exception& e) {
    throw FormatError(index_path.string() + ": " + e.what());
  }
}

}  // namespace openvox
