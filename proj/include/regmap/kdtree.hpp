#pragma once

#include "regmap/reference_element.hpp"

#include <vector>

namespace regmap {

/// Static 2D KD-tree over a point cloud (median splits, alternating axes).
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::vector<Vec2> points);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  /// Indices of the k nearest points, closest first (ties by lower index).
  std::vector<int> nearest(const Vec2& x, int k) const;

  int nearest_one(const Vec2& x) const;

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int build(std::vector<int>& idx, int lo, int hi, int depth);

  std::vector<Vec2> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace regmap
