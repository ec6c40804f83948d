#include "regmap/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <utility>

namespace regmap {

KdTree::KdTree(std::vector<Vec2> points) : points_(std::move(points)) {
  std::vector<int> idx(points_.size());
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(idx, 0, static_cast<int>(idx.size()), 0);
}

int KdTree::build(std::vector<int>& idx, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % 2;
  const int mid = lo + (hi - lo) / 2;
  std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi, [&](int a, int b) {
    const double pa = points_[a][axis];
    const double pb = points_[b][axis];
    return pa < pb || (pa == pb && a < b);
  });
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({idx[mid], axis, -1, -1});
  const int l = build(idx, lo, mid, depth + 1);
  const int r = build(idx, mid + 1, hi, depth + 1);
  nodes_[id].left = l;
  nodes_[id].right = r;
  return id;
}

std::vector<int> KdTree::nearest(const Vec2& x, int k) const {
  if (root_ < 0 || k <= 0) return {};
  // Max-heap of (distance^2, index) keeping the k best.
  using Item = std::pair<double, int>;
  std::priority_queue<Item> heap;

  struct Frame {
    int node;
    double bound;
  };
  std::vector<Frame> frames{{root_, 0.0}};
  while (!frames.empty()) {
    const Frame f = frames.back();
    frames.pop_back();
    if (f.node < 0) continue;
    if (static_cast<int>(heap.size()) == k && f.bound > heap.top().first) continue;
    const Node& n = nodes_[f.node];
    const Vec2& p = points_[n.point];
    const double d2 = (p - x).squaredNorm();
    const Item cand{d2, n.point};
    if (static_cast<int>(heap.size()) < k) {
      heap.push(cand);
    } else if (cand < heap.top()) {
      heap.pop();
      heap.push(cand);
    }
    const double diff = x[n.axis] - p[n.axis];
    const int near = diff <= 0 ? n.left : n.right;
    const int far = diff <= 0 ? n.right : n.left;
    frames.push_back({far, diff * diff});
    frames.push_back({near, 0.0});
  }
  std::vector<Item> items;
  items.reserve(heap.size());
  while (!heap.empty()) {
    items.push_back(heap.top());
    heap.pop();
  }
  std::sort(items.begin(), items.end());
  std::vector<int> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.second);
  return out;
}

int KdTree::nearest_one(const Vec2& x) const {
  const auto r = nearest(x, 1);
  return r.empty() ? -1 : r.front();
}

}  // namespace regmap
