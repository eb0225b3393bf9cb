#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "asal/kernels.hpp"
#include "asal/matrix.hpp"
#include "asal/query_mask.hpp"

namespace asal {

using kernels::Neighbor;

enum class SplitRule {
  kMaxSpread,  // split the dimension with the widest extent in the node
  kCycle,      // split dimension = depth mod width
};

struct KdNode {
  std::uint32_t point = 0;  // pool index stored at this node
  std::uint32_t dim = 0;
  double split = 0.0;       // coordinate of `point` along `dim`
  std::int32_t left = -1;   // points with (coord, index) below the split
  std::int32_t right = -1;  // points above
};

struct QueryStats {
  std::size_t nodes_visited = 0;
};

/// Exact Euclidean nearest-neighbour index with one point per node.
///
/// Construction is balanced (median split) and O(n log n). Queries backtrack
/// into the far child only when the splitting plane is within the current
/// k-th best distance, so results equal a brute-force scan. Ties are broken
/// by the lowest pool index. Masked points are skipped during the search;
/// the tree itself is immutable and safe for concurrent queries.
class KdTree {
 public:
  static KdTree build(const Matrix& points, SplitRule rule = SplitRule::kMaxSpread);

  std::size_t size() const { return nodes_.size(); }
  std::size_t width() const { return coords_.cols(); }
  const std::vector<KdNode>& nodes() const { return nodes_; }
  std::int32_t root() const { return root_; }

  std::size_t nearest(std::span<const double> query, const QueryMask& mask,
                      QueryStats* stats = nullptr) const;
  /// k closest unmasked points in ascending (distance, index) order.
  std::vector<Neighbor> k_nearest(std::span<const double> query, std::size_t k,
                                  const QueryMask& mask, QueryStats* stats = nullptr) const;

  /// Pool indices in in-order traversal.
  std::vector<std::size_t> in_order() const;
  /// Checks that every subtree respects its ancestors' split planes.
  bool respects_split_planes() const;

 private:
  struct Search;
  std::int32_t build_range(std::vector<std::uint32_t>& idx, std::size_t first, std::size_t last,
                           std::size_t depth, const Matrix& points, SplitRule rule);
  void search(std::int32_t node, Search& s) const;

  Matrix coords_;  // row i: coordinates of nodes_[i].point
  std::vector<KdNode> nodes_;
  std::int32_t root_ = -1;
};

}  // namespace asal
