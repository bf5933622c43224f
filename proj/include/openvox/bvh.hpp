#pragma once

#include <cstdint>
#include <vector>

#include "openvox/geometry.hpp"

namespace openvox {

struct BvhItem {
  std::uint64_t id = 0;
  Aabb box;
};

// Static bounding volume hierarchy over instance AABBs. Built top-down with
// a median split on the longest centroid axis; immutable afterwards.
class Bvh {
 public:
  static constexpr int kLeafSize = 2;

  struct Node {
    Aabb box;
    int left = -1;  // child node indices, -1 for leaves
    int right = -1;
    int first = 0;  // leaf item range in items()
    int count = 0;
    bool leaf() const { return left < 0; }
  };

  Bvh() = default;
  static Bvh build(std::vector<BvhItem> items);

  // Ids (ascending) of every item whose box intersects query inflated by
  // margin. Exact at the AABB level, so a superset of true voxel contacts.
  std::vector<std::uint64_t> query(const Aabb& query, double margin) const;

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<BvhItem>& items() const { return items_; }

  // Children contained in parents, every item in exactly one leaf.
  bool valid() const;

 private:
  int build_range(int first, int count);

  std::vector<Node> nodes_;
  std::vector<BvhItem> items_;
};

}  // namespace openvox
