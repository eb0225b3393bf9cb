#include "asal/kdtree.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>

#include "asal/error.hpp"

namespace asal {

KdTree KdTree::build(const Matrix& points, SplitRule rule) {
  if (points.rows() == 0) throw ArgumentError("cannot build a k-d tree over zero points");
  if (points.cols() == 0) throw ArgumentError("k-d tree points need at least one dimension");
  if (points.rows() > std::numeric_limits<std::int32_t>::max())
    throw ArgumentError("too many points for a k-d tree");
  KdTree tree;
  tree.nodes_.reserve(points.rows());
  tree.coords_ = Matrix(points.rows(), points.cols());
  std::vector<std::uint32_t> idx(points.rows());
  std::iota(idx.begin(), idx.end(), 0u);
  tree.root_ = tree.build_range(idx, 0, idx.size(), 0, points, rule);
  return tree;
}

std::int32_t KdTree::build_range(std::vector<std::uint32_t>& idx, std::size_t first,
                                 std::size_t last, std::size_t depth, const Matrix& points,
                                 SplitRule rule) {
  if (first >= last) return -1;
  const std::size_t d = points.cols();
  std::uint32_t dim = 0;
  if (rule == SplitRule::kCycle) {
    dim = static_cast<std::uint32_t>(depth % d);
  } else {
    double best = -1.0;
    for (std::size_t j = 0; j < d; ++j) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t i = first; i < last; ++i) {
        const double v = points(idx[i], j);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best) {
        best = hi - lo;
        dim = static_cast<std::uint32_t>(j);
      }
    }
  }

  const std::size_t mid = first + (last - first) / 2;
  auto less = [&](std::uint32_t a, std::uint32_t b) {
    const double va = points(a, dim);
    const double vb = points(b, dim);
    return va < vb || (va == vb && a < b);
  };
  std::nth_element(idx.begin() + static_cast<std::ptrdiff_t>(first),
                   idx.begin() + static_cast<std::ptrdiff_t>(mid),
                   idx.begin() + static_cast<std::ptrdiff_t>(last), less);

  const auto self = static_cast<std::int32_t>(nodes_.size());
  KdNode node;
  node.point = idx[mid];
  node.dim = dim;
  node.split = points(idx[mid], dim);
  nodes_.push_back(node);
  auto src = points.row(idx[mid]);
  std::copy(src.begin(), src.end(), coords_.row(static_cast<std::size_t>(self)).begin());

  const std::int32_t left = build_range(idx, first, mid, depth + 1, points, rule);
  const std::int32_t right = build_range(idx, mid + 1, last, depth + 1, points, rule);
  nodes_[static_cast<std::size_t>(self)].left = left;
  nodes_[static_cast<std::size_t>(self)].right = right;
  return self;
}

struct KdTree::Search {
  std::span<const double> query;
  const QueryMask* mask;
  std::size_t k;
  std::vector<Neighbor> heap;  // max-heap on kernels::closer
  std::size_t visited = 0;

  double worst() const {
    return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.front().distance_sq;
  }

  void offer(const Neighbor& n) {
    if (heap.size() < k) {
      heap.push_back(n);
      std::push_heap(heap.begin(), heap.end(), kernels::closer);
    } else if (kernels::closer(n, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), kernels::closer);
      heap.back() = n;
      std::push_heap(heap.begin(), heap.end(), kernels::closer);
    }
  }
};

void KdTree::search(std::int32_t node_id, Search& s) const {
  while (node_id >= 0) {
    const auto id = static_cast<std::size_t>(node_id);
    const KdNode& node = nodes_[id];
    ++s.visited;
    if (!s.mask->masked(node.point)) {
      const double dist = squared_distance(coords_.row(id), s.query);
      if (dist <= s.worst()) s.offer({node.point, dist});
    }
    const double diff = s.query[node.dim] - node.split;
    const std::int32_t near = diff < 0.0 ? node.left : node.right;
    const std::int32_t far = diff < 0.0 ? node.right : node.left;
    search(near, s);
    // Equality keeps ties on the plane reachable so index tie-breaks stay exact.
    if (diff * diff > s.worst()) return;
    node_id = far;
  }
}

std::vector<Neighbor> KdTree::k_nearest(std::span<const double> query, std::size_t k,
                                        const QueryMask& mask, QueryStats* stats) const {
  if (query.size() != width()) throw DimensionError("query width does not match the tree");
  if (mask.size() != size()) throw DimensionError("mask size does not match the tree");
  if (k == 0) throw ArgumentError("k must be >= 1");
  if (mask.unmasked_count() < k) throw ExhaustedPoolError("fewer than k unmasked pool samples");
  Search s{query, &mask, k, {}, 0};
  s.heap.reserve(k + 1);
  search(root_, s);
  std::sort(s.heap.begin(), s.heap.end(), kernels::closer);
  if (stats) stats->nodes_visited += s.visited;
  return std::move(s.heap);
}

std::size_t KdTree::nearest(std::span<const double> query, const QueryMask& mask,
                            QueryStats* stats) const {
  return k_nearest(query, 1, mask, stats).front().index;
}

std::vector<std::size_t> KdTree::in_order() const {
  std::vector<std::size_t> out;
  out.reserve(nodes_.size());
  std::vector<std::int32_t> stack;
  std::int32_t cur = root_;
  while (cur >= 0 || !stack.empty()) {
    while (cur >= 0) {
      stack.push_back(cur);
      cur = nodes_[static_cast<std::size_t>(cur)].left;
    }
    cur = stack.back();
    stack.pop_back();
    out.push_back(nodes_[static_cast<std::size_t>(cur)].point);
    cur = nodes_[static_cast<std::size_t>(cur)].right;
  }
  return out;
}

bool KdTree::respects_split_planes() const {
  // Each subtree node must lie on the correct side of every ancestor plane,
  // comparing (coordinate, index) like construction does.
  struct Bound {
    std::uint32_t dim;
    double value;
    std::uint32_t point;
    bool below;
  };
  std::vector<Bound> bounds;
  std::function<bool(std::int32_t)> walk = [&](std::int32_t id) -> bool {
    if (id < 0) return true;
    const auto u = static_cast<std::size_t>(id);
    const KdNode& node = nodes_[u];
    for (const auto& b : bounds) {
      const double v = coords_(u, b.dim);
      const bool below = v < b.value || (v == b.value && node.point < b.point);
      if (below != b.below) return false;
    }
    bounds.push_back({node.dim, node.split, node.point, true});
    const bool ok_left = walk(node.left);
    bounds.back().below = false;
    const bool ok_right = ok_left && walk(node.right);
    bounds.pop_back();
    return ok_left && ok_right;
  };
  return walk(root_);
}

}  // namespace asal
