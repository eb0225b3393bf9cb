#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "asal/error.hpp"
#include "asal/kdtree.hpp"
#include "asal/kernels.hpp"
#include "test_util.hpp"

using namespace asal;
using asal::test::random_matrix;

namespace {

// Exhaustive scan with the (distance, index) tie order.
std::vector<Neighbor> brute_force(const Matrix& pts, std::span<const double> q, std::size_t k,
                                  const QueryMask& mask) {
  std::vector<Neighbor> all;
  for (std::size_t i = 0; i < pts.rows(); ++i)
    if (!mask.masked(i)) all.push_back({i, squared_distance(pts.row(i), q)});
  std::sort(all.begin(), all.end(), kernels::closer);
  all.resize(std::min(k, all.size()));
  return all;
}

Matrix grid_points() {
  // Integer grid: many exact distance ties.
  Matrix m(0, 2);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const double row[2] = {static_cast<double>(i), static_cast<double>(j)};
      m.append_row(row);
    }
  return m;
}

}  // namespace

TEST_CASE("kd-tree agrees with brute force") {
  Rng rng(42);
  for (const SplitRule rule : {SplitRule::kMaxSpread, SplitRule::kCycle}) {
    for (const std::size_t dim : {1u, 2u, 5u, 12u}) {
      const Matrix pts = random_matrix(400, dim, rng);
      const KdTree tree = KdTree::build(pts, rule);
      QueryMask mask(pts.rows());
      for (std::size_t i = 0; i < pts.rows(); i += 3) mask.set(i);
      for (int t = 0; t < 50; ++t) {
        const Matrix q = random_matrix(1, dim, rng, 1.5);
        CHECK(tree.k_nearest(q.row(0), 5, mask) == brute_force(pts, q.row(0), 5, mask));
        CHECK(tree.nearest(q.row(0), mask) == brute_force(pts, q.row(0), 1, mask)[0].index);
      }
    }
  }
}

TEST_CASE("kd-tree ties resolve to the lowest index") {
  const Matrix pts = grid_points();
  for (const SplitRule rule : {SplitRule::kMaxSpread, SplitRule::kCycle}) {
    const KdTree tree = KdTree::build(pts, rule);
    QueryMask mask(pts.rows());
    // (2.5, 2.5) is equidistant from four grid points.
    const double q[2] = {2.5, 2.5};
    CHECK(tree.k_nearest(q, 4, mask) == brute_force(pts, q, 4, mask));
    CHECK(tree.nearest(q, mask) == 14);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        const double g[2] = {i + 0.5, j * 1.0};
        CHECK(tree.k_nearest(g, 7, mask) == brute_force(pts, g, 7, mask));
      }
  }
}

TEST_CASE("duplicates and single points") {
  Matrix dup(5, 3, 1.0);
  const KdTree tree = KdTree::build(dup);
  QueryMask mask(5);
  const double q[3] = {0.0, 0.0, 0.0};
  CHECK(tree.nearest(q, mask) == 0);
  mask.set(0);
  mask.set(1);
  CHECK(tree.nearest(q, mask) == 2);

  const KdTree one = KdTree::build(Matrix{{3.0, 4.0}});
  QueryMask m1(1);
  const double q2[2] = {0.0, 0.0};
  const auto nn = one.k_nearest(q2, 1, m1);
  CHECK(nn[0].index == 0);
  CHECK(nn[0].distance_sq == 25.0);
  m1.set(0);
  CHECK_THROWS_AS(one.nearest(q2, m1), ExhaustedPoolError);
}

TEST_CASE("exact matches and masking of the query point itself") {
  Rng rng(1);
  const Matrix pts = random_matrix(200, 4, rng);
  const KdTree tree = KdTree::build(pts);
  QueryMask mask(200);
  for (std::size_t i = 0; i < 200; i += 17) {
    CHECK(tree.nearest(pts.row(i), mask) == i);
    mask.set(i);
    CHECK(tree.nearest(pts.row(i), mask) != i);
    mask.clear(i);
  }
}

TEST_CASE("kd-tree structure") {
  Rng rng(4);
  const Matrix pts = random_matrix(257, 3, rng);
  for (const SplitRule rule : {SplitRule::kMaxSpread, SplitRule::kCycle}) {
    const KdTree tree = KdTree::build(pts, rule);
    CHECK(tree.size() == 257);
    CHECK(tree.respects_split_planes());
    auto order = tree.in_order();
    std::sort(order.begin(), order.end());
    std::vector<std::size_t> expect(257);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(order == expect);
  }
  const KdTree cyc = KdTree::build(pts, SplitRule::kCycle);
  CHECK(cyc.nodes()[cyc.root()].dim == 0);
}

TEST_CASE("kd-tree errors") {
  CHECK_THROWS_AS(KdTree::build(Matrix(0, 3)), ArgumentError);
  const KdTree tree = KdTree::build(Matrix{{0.0, 0.0}, {1.0, 1.0}});
  QueryMask mask(2);
  const double bad[3] = {0, 0, 0};
  CHECK_THROWS_AS(tree.nearest(bad, mask), DimensionError);
  const double q[2] = {0, 0};
  QueryMask wrong(3);
  CHECK_THROWS_AS(tree.nearest(q, wrong), DimensionError);
  CHECK_THROWS_AS(tree.k_nearest(q, 0, mask), ArgumentError);
  CHECK_THROWS_AS(tree.k_nearest(q, 3, mask), ExhaustedPoolError);
}

TEST_CASE("search prunes on clustered low-dimensional data") {
  Rng rng(8);
  const Matrix pts = random_matrix(20000, 2, rng);
  const KdTree tree = KdTree::build(pts);
  QueryMask mask(pts.rows());
  QueryStats stats;
  for (int t = 0; t < 100; ++t) {
    const Matrix q = random_matrix(1, 2, rng);
    (void)tree.nearest(q.row(0), mask, &stats);
  }
  CHECK(stats.nodes_visited > 100);
  CHECK(stats.nodes_visited / 100.0 < 200.0);
}

TEST_CASE("brute-force kernels agree serial and parallel") {
  Rng rng(6);
  const Matrix pts = random_matrix(3000, 7, rng);
  QueryMask mask(pts.rows());
  for (std::size_t i = 0; i < pts.rows(); i += 5) mask.set(i);
  const Matrix q = random_matrix(1, 7, rng);
  const auto s = kernels::serial::k_nearest(pts, q.row(0), 10, &mask);
  CHECK(s == kernels::parallel::k_nearest(pts, q.row(0), 10, &mask));
  CHECK(s == brute_force(pts, q.row(0), 10, mask));

  std::vector<double> a(pts.rows(), 1e300), b(pts.rows(), 1e300);
  kernels::serial::update_min_distance(pts, q.row(0), a);
  kernels::parallel::update_min_distance(pts, q.row(0), b);
  CHECK(a == b);
  CHECK(a[3] == squared_distance(pts.row(3), q.row(0)));
}
