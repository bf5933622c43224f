#include "openvox/bvh.hpp"

#include <algorithm>

namespace openvox {

Bvh Bvh::build(std::vector<BvhItem> items) {
  Bvh bvh;
  bvh.items_ = std::move(items);
  if (!bvh.items_.empty()) {
    bvh.nodes_.reserve(2 * bvh.items_.size());
    bvh.build_range(0, static_cast<int>(bvh.items_.size()));
  }
  return bvh;
}

int Bvh::build_range(int first, int count) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Aabb box;
  Aabb centroids;
  for (int i = first; i < first + count; ++i) {
    box.expand(items_[i].box);
    centroids.expand(items_[i].box.center());
  }
  nodes_[index].box = box;
  if (count <= kLeafSize) {
    nodes_[index].first = first;
    nodes_[index].count = count;
    return index;
  }
  Eigen::Index axis = 0;
  (centroids.max - centroids.min).maxCoeff(&axis);
  const int mid = first + count / 2;
  // Ties broken by id so the tree shape is deterministic.
  std::nth_element(items_.begin() + first, items_.begin() + mid, items_.begin() + first + count,
                   [axis](const BvhItem& a, const BvhItem& b) {
                     const double ca = a.box.center()(axis);
                     const double cb = b.box.center()(axis);
                     return ca < cb || (ca == cb && a.id < b.id);
                   });
  const int left = build_range(first, mid - first);
  const int right = build_range(mid, first + count - mid);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

std::vector<std::uint64_t> Bvh::query(const Aabb& query, double margin) const {
  std::vector<std::uint64_t> hits;
  if (nodes_.empty() || query.empty()) return hits;
  const Aabb q = query.inflated(margin);
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (!node.box.intersects(q)) continue;
    if (node.leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        if (items_[i].box.intersects(q)) hits.push_back(items_[i].id);
      }
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

bool Bvh::valid() const {
  if (nodes_.empty()) return items_.empty();
  std::vector<int> seen(items_.size(), 0);
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (node.leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        if (!node.box.contains(items_[i].box)) return false;
        ++seen[i];
      }
    } else {
      if (!node.box.contains(nodes_[node.left].box) || !node.box.contains(nodes_[node.right].box)) return false;
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
}

}  // namespace openvox
