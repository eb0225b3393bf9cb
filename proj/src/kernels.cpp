#include "asal/kernels.hpp"

#include <algorithm>

#include "asal/error.hpp"
#include "asal/models.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace asal::kernels {

namespace {

std::size_t chunk_count(std::size_t rows) { return (rows + kRowChunk - 1) / kRowChunk; }

void map_chunk(const Mlp& net, const Matrix& x, std::size_t stop, std::size_t chunk, Matrix& out) {
  const std::size_t first = chunk * kRowChunk;
  const std::size_t count = std::min(kRowChunk, x.rows() - first);
  const Matrix y = net.forward(x.slice_rows(first, count), stop);
  std::copy(y.data().begin(), y.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(first * out.cols()));
}

void entropy_chunk(const Classifier& model, const Matrix& x, std::size_t chunk,
                   std::vector<double>& out) {
  const std::size_t first = chunk * kRowChunk;
  const std::size_t count = std::min(kRowChunk, x.rows() - first);
  const Matrix p = model.predict_proba(x.slice_rows(first, count));
  for (std::size_t i = 0; i < count; ++i) out[first + i] = row_entropy(p.row(i));
}

void project_row(const Matrix& x, const Matrix& mean, const Matrix& components, std::size_t r,
                 std::vector<double>& centered, Matrix& out) {
  auto xr = x.row(r);
  for (std::size_t j = 0; j < centered.size(); ++j) centered[j] = xr[j] - mean(0, j);
  auto o = out.row(r);
  for (std::size_t c = 0; c < components.rows(); ++c) {
    auto comp = components.row(c);
    double acc = 0.0;
    for (std::size_t j = 0; j < centered.size(); ++j) acc += centered[j] * comp[j];
    o[c] = acc;
  }
}

void check_projection(const Matrix& x, const Matrix& mean, const Matrix& components) {
  if (mean.rows() != 1 || mean.cols() != x.cols() || components.cols() != x.cols())
    throw DimensionError("projection width mismatch");
}

// Bounded max-heap on `closer`: front() is the worst kept neighbour.
struct TopK {
  explicit TopK(std::size_t k) : k(k) { heap.reserve(k + 1); }

  void offer(const Neighbor& n) {
    if (heap.size() < k) {
      heap.push_back(n);
      std::push_heap(heap.begin(), heap.end(), closer);
    } else if (closer(n, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), closer);
      heap.back() = n;
      std::push_heap(heap.begin(), heap.end(), closer);
    }
  }

  std::size_t k;
  std::vector<Neighbor> heap;
};

void scan_range(const Matrix& points, std::span<const double> query, const QueryMask* mask,
                std::size_t first, std::size_t last, TopK& top) {
  for (std::size_t i = first; i < last; ++i) {
    if (mask && mask->masked(i)) continue;
    top.offer({i, squared_distance(points.row(i), query)});
  }
}

void check_knn(const Matrix& points, std::span<const double> query, std::size_t k,
               const QueryMask* mask) {
  if (query.size() != points.cols()) throw DimensionError("query width does not match points");
  if (mask && mask->size() != points.rows()) throw DimensionError("mask size does not match points");
  if (k == 0) throw ArgumentError("k must be >= 1");
  const std::size_t available = mask ? mask->unmasked_count() : points.rows();
  if (available < k) throw ExhaustedPoolError("fewer than k unmasked points");
}

}  // namespace

namespace serial {

Matrix map_rows(const Mlp& net, const Matrix& x, std::size_t stop) {
  Matrix out(x.rows(), net.width_at(stop));
  for (std::size_t c = 0; c < chunk_count(x.rows()); ++c) map_chunk(net, x, stop, c, out);
  return out;
}

std::vector<double> entropy_scores(const Classifier& model, const Matrix& x) {
  std::vector<double> out(x.rows());
  for (std::size_t c = 0; c < chunk_count(x.rows()); ++c) entropy_chunk(model, x, c, out);
  return out;
}

Matrix project(const Matrix& x, const Matrix& mean, const Matrix& components) {
  check_projection(x, mean, components);
  Matrix out(x.rows(), components.rows());
  std::vector<double> centered(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) project_row(x, mean, components, r, centered, out);
  return out;
}

std::vector<Neighbor> k_nearest(const Matrix& points, std::span<const double> query, std::size_t k,
                                const QueryMask* mask) {
  check_knn(points, query, k, mask);
  TopK top(k);
  scan_range(points, query, mask, 0, points.rows(), top);
  std::sort(top.heap.begin(), top.heap.end(), closer);
  return top.heap;
}

void update_min_distance(const Matrix& points, std::span<const double> center,
                         std::span<double> min_sq) {
  for (std::size_t i = 0; i < points.rows(); ++i)
    min_sq[i] = std::min(min_sq[i], squared_distance(points.row(i), center));
}

}  // namespace serial

namespace parallel {

Matrix map_rows(const Mlp& net, const Matrix& x, std::size_t stop) {
  Matrix out(x.rows(), net.width_at(stop));
  const auto chunks = static_cast<std::ptrdiff_t>(chunk_count(x.rows()));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) map_chunk(net, x, stop, static_cast<std::size_t>(c), out);
  return out;
}

std::vector<double> entropy_scores(const Classifier& model, const Matrix& x) {
  std::vector<double> out(x.rows());
  const auto chunks = static_cast<std::ptrdiff_t>(chunk_count(x.rows()));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) entropy_chunk(model, x, static_cast<std::size_t>(c), out);
  return out;
}

Matrix project(const Matrix& x, const Matrix& mean, const Matrix& components) {
  check_projection(x, mean, components);
  Matrix out(x.rows(), components.rows());
  const auto rows = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel
  {
    std::vector<double> centered(x.cols());
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < rows; ++r)
      project_row(x, mean, components, static_cast<std::size_t>(r), centered, out);
  }
  return out;
}

std::vector<Neighbor> k_nearest(const Matrix& points, std::span<const double> query, std::size_t k,
                                const QueryMask* mask) {
  check_knn(points, query, k, mask);
  const int threads = max_threads();
  std::vector<std::vector<Neighbor>> partial(static_cast<std::size_t>(threads));
#pragma omp parallel num_threads(threads)
  {
#ifdef _OPENMP
    const auto t = static_cast<std::size_t>(omp_get_thread_num());
    const auto nt = static_cast<std::size_t>(omp_get_num_threads());
#else
    const std::size_t t = 0, nt = 1;
#endif
    const std::size_t per = (points.rows() + nt - 1) / nt;
    const std::size_t first = std::min(points.rows(), t * per);
    const std::size_t last = std::min(points.rows(), first + per);
    TopK top(k);
    scan_range(points, query, mask, first, last, top);
    partial[t] = std::move(top.heap);
  }
  std::vector<Neighbor> merged;
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  std::sort(merged.begin(), merged.end(), closer);
  merged.resize(k);
  return merged;
}

void update_min_distance(const Matrix& points, std::span<const double> center,
                         std::span<double> min_sq) {
  const auto rows = static_cast<std::ptrdiff_t>(points.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto u = static_cast<std::size_t>(i);
    min_sq[u] = std::min(min_sq[u], squared_distance(points.row(u), center));
  }
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

SingleThreadScope::SingleThreadScope() {
#ifdef _OPENMP
  previous_ = omp_get_max_threads();
  omp_set_num_threads(1);
#endif
}

SingleThreadScope::~SingleThreadScope() {
#ifdef _OPENMP
  omp_set_num_threads(previous_);
#endif
}

}  // namespace asal::kernels
