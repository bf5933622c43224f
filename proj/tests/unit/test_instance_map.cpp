#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "openvox/instance_map.hpp"
#include "openvox/snapshot.hpp"
#include "openvox/tensor_io.hpp"
#include "support.hpp"

using namespace openvox;
using testing::block;

namespace {

constexpr double kRes = 0.05;

Detection det(VoxelSet voxels, std::vector<float> tracking, float q = 0.5f, std::int64_t frame = 0) {
  Detection d;
  d.voxels = std::move(voxels);
  d.tracking = std::move(tracking);
  d.semantic = {{1.0f, 0.0f}, q};
  d.frame_id = frame;
  return d;
}

Instance inst(std::uint64_t id, VoxelSet voxels, std::vector<float> tracking) {
  Instance i;
  i.id = id;
  i.voxels = std::move(voxels);
  i.tracking = std::move(tracking);
  i.semantic = {{0.0f, 1.0f}, 0.1f};
  return i;
}

bool same_instances(const InstanceMap& a, const InstanceMap& b) {
  if (a.instances().size() != b.instances().size() || a.next_id() != b.next_id()) return false;
  for (const auto& [id, x] : a.instances()) {
    const Instance* y = b.find(id);
    if (!y || !(x.voxels == y->voxels) || x.tracking != y->tracking || !(x.semantic == y->semantic) ||
        x.obs_count != y->obs_count || x.last_seen != y->last_seen || x.aabb.min != y->aabb.min ||
        x.aabb.max != y->aabb.max) {
      return false;
    }
  }
  return true;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

TEST_SUITE("instance_map") {
  TEST_CASE("disjoint detections on an empty map create instances") {
    InstanceMap map(kRes);
    const std::vector<Detection> dets{det(block(0, 0, 0, 3, 3, 3, kRes), {1, 0}),
                                      det(block(100, 0, 0, 3, 3, 3, kRes), {1, 0}),
                                      det(block(0, 100, 0, 3, 3, 3, kRes), {1, 0})};
    const auto before = map.stats().instances;
    const auto r = map.associate_frame(dets, 0);
    CHECK(r.created == 3);
    CHECK(r.matched == 0);
    CHECK(map.stats().instances == before + r.created);
  }

  TEST_CASE("identical re-observation matches without growing") {
    InstanceMap map(kRes);
    const std::vector<Detection> first{det(block(0, 0, 0, 4, 4, 4, kRes), {0, 1}, 0.4f, 0)};
    map.associate_frame(first, 0);
    const std::vector<Detection> again{det(block(0, 0, 0, 4, 4, 4, kRes), {0, 1}, 0.9f, 1)};
    const auto r = map.associate_frame(again, 1);
    CHECK(r.matched == 1);
    CHECK(r.created == 0);
    REQUIRE(map.instances().size() == 1);
    const Instance& i = map.instances().begin()->second;
    CHECK(i.obs_count == 2);
    CHECK(i.voxels == block(0, 0, 0, 4, 4, 4, kRes));
    CHECK(i.semantic.quality == 0.9f);
    CHECK(i.last_seen == 1);
  }

  TEST_CASE("visual gate blocks geometric matches") {
    InstanceMap map(kRes);
    const std::vector<Detection> a{det(block(0, 0, 0, 4, 4, 4, kRes), {1, 0})};
    map.associate_frame(a, 0);
    const std::vector<Detection> b{det(block(0, 0, 0, 4, 4, 4, kRes), {0, 1})};
    const auto r = map.associate_frame(b, 1);
    CHECK(r.created == 1);
    CHECK(map.instances().size() == 2);
  }

  TEST_CASE("best candidate wins among qualifying instances") {
    // Detection overlaps instance 0 by 0.5 and instance 1 fully; 0 and 1 overlap by 0.2.
    auto map = InstanceMap::restore(kRes, {}, {inst(0, block(0, 0, 0, 10, 1, 1, kRes), {1, 0}),
                                               inst(1, block(8, 0, 0, 10, 1, 1, kRes), {1, 0})},
                                    2);
    const std::vector<Detection> d{det(block(8, 0, 0, 4, 1, 1, kRes), {1, 0})};
    const auto r = map.associate_frame(d, 5);
    CHECK(r.matched == 1);
    CHECK(r.merged == 0);
    REQUIRE(map.instances().size() == 2);
    CHECK(map.find(1)->obs_count == 2);
    CHECK(map.find(1)->last_seen == 5);
    CHECK(map.find(0)->obs_count == 1);
  }

  TEST_CASE("qualifying pair in the active set merges into the lower id, as the all-pairs oracle says") {
    // overlap_min(A, B) = 0.6 and tracking cosine 0.95.
    const VoxelSet a = block(0, 0, 0, 10, 1, 1, kRes);
    const VoxelSet b = block(4, 0, 0, 10, 1, 1, kRes);
    const std::vector<float> ta{1.0f, 0.0f};
    const std::vector<float> tb{0.95f, std::sqrt(1.0f - 0.95f * 0.95f)};
    CHECK(voxel_overlap(a, b).overlap_min == doctest::Approx(0.6));
    auto map = InstanceMap::restore(kRes, {}, {inst(3, a, ta), inst(8, b, tb)}, 9);
    // A small far detection that only pulls both into the active set through the margin.
    const std::vector<Detection> d{det(block(6, 1, 0, 1, 1, 1, kRes), {0, 1})};

    // Oracle: union-find over qualifying pairs among existing active instances.
    UnionFind uf(2);
    if (voxel_overlap(a, b).overlap_min >= 0.3 && cosine(ta, tb) >= 0.8) uf.unite(0, 1);
    const bool oracle_merged = uf.find(0) == uf.find(1);

    const auto r = map.associate_frame(d, 1);
    CHECK(oracle_merged);
    CHECK(r.merged == 1);
    CHECK(r.created == 1);
    REQUIRE(map.find(3) != nullptr);
    CHECK(map.find(8) == nullptr);
    CHECK(map.find(3)->voxels == a.united(b));
    CHECK(map.find(3)->obs_count == 2);
  }

  TEST_CASE("finalize leaves a non-qualifying map unchanged") {
    auto map = InstanceMap::restore(kRes, {}, {inst(0, block(0, 0, 0, 3, 3, 3, kRes), {1, 0}),
                                               inst(1, block(50, 0, 0, 3, 3, 3, kRes), {1, 0})},
                                    2);
    const auto copy = map;
    const auto r = map.finalize();
    CHECK(r.merged == 0);
    CHECK(r.removed == 0);
    CHECK(same_instances(map, copy));
  }

  TEST_CASE("finalize removes instances below min_voxels") {
    auto map = InstanceMap::restore(kRes, {}, {inst(0, block(0, 0, 0, 3, 1, 1, kRes), {1, 0}),
                                               inst(1, block(50, 0, 0, 3, 3, 3, kRes), {1, 0})},
                                    2);
    const auto r = map.finalize();
    CHECK(r.removed == 1);
    CHECK(map.find(0) == nullptr);
    CHECK(map.find(1) != nullptr);
  }

  TEST_CASE("chain A-B-C collapses to one instance like union-find") {
    const std::vector<VoxelSet> sets{block(0, 0, 0, 10, 1, 1, kRes), block(5, 0, 0, 10, 1, 1, kRes),
                                     block(10, 0, 0, 10, 1, 1, kRes)};
    std::vector<Instance> insts;
    for (std::uint64_t i = 0; i < 3; ++i) insts.push_back(inst(i, sets[i], {1, 0}));
    CHECK(voxel_overlap(sets[0], sets[2]).intersection == 0);
    UnionFind uf(3);
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j)
        if (voxel_overlap(sets[i], sets[j]).overlap_min >= 0.3) uf.unite(i, j);
    CHECK(uf.find(0) == uf.find(2));

    auto map = InstanceMap::restore(kRes, {}, insts, 3);
    map.finalize();
    REQUIRE(map.instances().size() == 1);
    CHECK(map.find(0)->voxels == sets[0].united(sets[1]).united(sets[2]));
  }

  TEST_CASE("finalize reaches a fixpoint on random maps") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Instance> insts;
      const std::vector<std::vector<float>> tracks{{1, 0}, {0, 1}, {0.9f, std::sqrt(0.19f)}};
      for (std::uint64_t i = 0; i < 25; ++i) {
        const int x = static_cast<int>(rng() % 30), n = 2 + static_cast<int>(rng() % 8);
        insts.push_back(inst(i, block(x, 0, 0, n, 2, 2, kRes), tracks[rng() % 3]));
      }
      auto map = InstanceMap::restore(kRes, {}, insts, 25);
      map.finalize();
      for (auto i = map.instances().begin(); i != map.instances().end(); ++i) {
        for (auto j = std::next(i); j != map.instances().end(); ++j) CHECK_FALSE(map.qualifies(i->second, j->second));
      }
    }
  }

  TEST_CASE("stats count instances and voxels") {
    InstanceMap empty(kRes);
    CHECK(empty.stats().instances == 0);
    CHECK(empty.stats().voxels == 0);
    CHECK(empty.stats().memory_bytes == 0);
    auto map = InstanceMap::restore(kRes, {}, {inst(0, block(0, 0, 0, 10, 1, 1, kRes), {1, 0}),
                                               inst(1, block(0, 9, 0, 10, 1, 1, kRes), {1, 0})},
                                    2);
    CHECK(map.stats().instances == 2);
    CHECK(map.stats().voxels == 20);
  }

  TEST_CASE("association is deterministic") {
    std::mt19937_64 rng(5);
    std::vector<std::vector<Detection>> frames;
    for (int f = 0; f < 30; ++f) {
      std::vector<Detection> dets;
      for (int k = 0; k < 4; ++k) {
        const int x = static_cast<int>(rng() % 40), n = 2 + static_cast<int>(rng() % 6);
        dets.push_back(det(block(x, 0, 0, n, 3, 3, kRes), testing::random_unit(rng, 2),
                           static_cast<float>(rng() % 100) / 100.0f, f));
      }
      frames.push_back(std::move(dets));
    }
    InstanceMap a(kRes), b(kRes);
    for (int f = 0; f < 30; ++f) {
      a.associate_frame(frames[f], f);
      b.associate_frame(frames[f], f);
    }
    a.finalize();
    b.finalize();
    CHECK(same_instances(a, b));
    CHECK(a.bvh().valid());
  }

  TEST_CASE("snapshot round-trip") {
    testing::TempDir dir("snapshot");
    std::mt19937_64 rng(6);
    InstanceMap map(kRes);
    for (int f = 0; f < 10; ++f) {
      std::vector<Detection> dets;
      for (int k = 0; k < 3; ++k) {
        Detection d = det(block(static_cast<int>(rng() % 30), 0, 0, 4, 4, 4, kRes), testing::random_unit(rng, 3),
                          static_cast<float>(rng() % 100) / 100.0f, f);
        d.semantic.vector = testing::random_unit(rng, 5);
        dets.push_back(std::move(d));
      }
      map.associate_frame(dets, f);
    }
    save_map(map, dir.path());
    const InstanceMap back = load_map(dir.path());
    CHECK(same_instances(map, back));
    CHECK(back.resolution() == map.resolution());

    InstanceMap empty(0.1);
    save_map(empty, dir / "empty");
    CHECK(load_map(dir / "empty").instances().empty());
  }

  TEST_CASE("snapshot rejects tampered config and payloads") {
    testing::TempDir dir("snapshot_bad");
    auto map = InstanceMap::restore(kRes, {}, {inst(0, block(0, 0, 0, 3, 3, 3, kRes), {1, 0})}, 1);
    save_map(map, dir.path());
    auto text = read_text_file(dir / "map.json");
    auto j = nlohmann::json::parse(text);
    j["config"]["tau_geo"] = 0.9;
    write_text_file(dir / "map.json", j.dump());
    CHECK_THROWS_AS(load_map(dir.path()), ValidationError);

    save_map(map, dir.path());
    write_tensor(Tensor(DType::I32, {5, 3}), dir / "voxels.dten");
    CHECK_THROWS_AS(load_map(dir.path()), ValidationError);
  }
}
