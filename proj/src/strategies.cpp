#include "asal/strategies.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "asal/error.hpp"
#include "asal/kernels.hpp"

namespace asal {

namespace {

constexpr StrategyKind kAllStrategies[] = {
    StrategyKind::kRandom,       StrategyKind::kMaxEntropy,    StrategyKind::kMinDistance,
    StrategyKind::kAsal,         StrategyKind::kAsalGenerate,  StrategyKind::kAsalNeighbors,
    StrategyKind::kCoreset,      StrategyKind::kGaal,
};

void check_request(const SelectionRequest& req) {
  if (!req.pool || !req.mask || !req.classifier) throw ArgumentError("incomplete selection request");
  if (req.count == 0) throw ArgumentError("selection count must be >= 1");
  if (req.mask->size() != req.pool->size()) throw DimensionError("mask does not match pool");
  if (req.mask->unmasked_count() < req.count)
    throw ExhaustedPoolError("requested " + std::to_string(req.count) + " samples but only " +
                             std::to_string(req.mask->unmasked_count()) + " remain");
}

void check_matching(const SelectionRequest& req) {
  const auto& m = req.matching;
  if (!m.generator || !m.extractor || !m.features || !m.tree)
    throw ConfigError("ASAL needs a generator, extractor, feature set and tree");
  if (!req.rng) throw ArgumentError("ASAL needs a random generator");
  if (m.tree->size() != req.pool->size()) throw DimensionError("tree does not cover the pool");
}

std::vector<double> entropies_of(const Classifier& model, const Matrix& samples,
                                 std::span<const std::size_t> indices) {
  return entropy(model.predict_proba(samples.gather_rows(indices))).data();
}

// Synthesise `count` samples and compress them into the matching space.
SyntheticBatch synthesize(const SelectionRequest& req, std::size_t count) {
  SynthesisConfig cfg = req.matching.synthesis;
  cfg.batch = count;
  return synthesize_uncertain(*req.matching.generator, *req.classifier, cfg, *req.rng);
}

}  // namespace

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kRandom: return "random";
    case StrategyKind::kMaxEntropy: return "max-entropy";
    case StrategyKind::kMinDistance: return "min-distance";
    case StrategyKind::kAsal: return "asal";
    case StrategyKind::kAsalGenerate: return "asal-generate";
    case StrategyKind::kAsalNeighbors: return "asal-neighbors";
    case StrategyKind::kCoreset: return "coreset";
    case StrategyKind::kGaal: return "gaal";
  }
  return "unknown";
}

std::string valid_strategy_names() {
  std::string out;
  for (auto k : kAllStrategies) {
    if (!out.empty()) out += ", ";
    out += to_string(k);
  }
  return out;
}

StrategyKind strategy_from_string(std::string_view name) {
  for (auto k : kAllStrategies)
    if (to_string(k) == name) return k;
  throw ConfigError("unknown strategy '" + std::string(name) + "' (valid: " + valid_strategy_names() + ")");
}

bool uses_generator(StrategyKind kind) {
  return kind == StrategyKind::kAsal || kind == StrategyKind::kAsalGenerate ||
         kind == StrategyKind::kAsalNeighbors || kind == StrategyKind::kGaal;
}

bool uses_matching(StrategyKind kind) { return uses_generator(kind) && kind != StrategyKind::kGaal; }

std::vector<std::size_t> top_by_score(std::span<const std::size_t> candidates,
                                      std::span<const double> scores, std::size_t count) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  count = std::min(count, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] ||
                             (scores[a] == scores[b] && candidates[a] < candidates[b]);
                    });
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(candidates[order[i]]);
  return out;
}

std::vector<std::size_t> match_queries(const KdTree& tree, const Matrix& queries, QueryMask& mask,
                                       std::vector<double>* distances) {
  std::vector<std::size_t> out;
  out.reserve(queries.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    const auto best = tree.k_nearest(queries.row(i), 1, mask).front();
    mask.set(best.index);
    out.push_back(best.index);
    if (distances) distances->push_back(std::sqrt(best.distance_sq));
  }
  return out;
}

Selection select_random(const SelectionRequest& req) {
  check_request(req);
  if (!req.rng) throw ArgumentError("random selection needs a random generator");
  auto candidates = req.mask->unmasked_indices();
  Selection sel;
  for (std::size_t i = 0; i < req.count; ++i) {
    const std::size_t j = i + req.rng->index(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
    sel.indices.push_back(candidates[i]);
    sel.scores.push_back(0.0);
  }
  return sel;
}

Selection select_max_entropy(const SelectionRequest& req) {
  check_request(req);
  const auto all = kernels::parallel::entropy_scores(*req.classifier, req.pool->samples());
  const auto candidates = req.mask->unmasked_indices();
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (auto i : candidates) scores.push_back(all[i]);
  Selection sel;
  sel.indices = top_by_score(candidates, scores, req.count);
  for (auto i : sel.indices) sel.scores.push_back(all[i]);
  return sel;
}

Selection select_min_distance(const SelectionRequest& req) {
  check_request(req);
  const Classifier& h = *req.classifier;
  if (!h.is_linear() || h.classes() != 2)
    throw UnsupportedError("minimum-distance sampling needs a binary linear classifier");
  const Layer& layer = h.network().layers().front();
  const std::size_t d = layer.weights.rows();
  std::vector<double> w(d);
  double norm = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    w[j] = layer.weights(j, 1) - layer.weights(j, 0);
    norm += w[j] * w[j];
  }
  norm = std::sqrt(norm);
  const double b = layer.bias(0, 1) - layer.bias(0, 0);

  const auto candidates = req.mask->unmasked_indices();
  std::vector<double> neg_distance;
  neg_distance.reserve(candidates.size());
  for (auto i : candidates) {
    auto x = req.pool->samples().row(i);
    double margin = b;
    for (std::size_t j = 0; j < d; ++j) margin += w[j] * x[j];
    neg_distance.push_back(-(norm > 0.0 ? std::abs(margin) / norm : std::abs(margin)));
  }
  Selection sel;
  sel.indices = top_by_score(candidates, neg_distance, req.count);
  std::vector<double> lookup(req.pool->size(), 0.0);
  for (std::size_t c = 0; c < candidates.size(); ++c) lookup[candidates[c]] = -neg_distance[c];
  for (auto i : sel.indices) sel.scores.push_back(lookup[i]);
  return sel;
}

Selection select_asal(const SelectionRequest& req) {
  check_request(req);
  check_matching(req);
  const auto& m = req.matching;
  Selection sel;
  SyntheticBatch batch = synthesize(req, req.count);
  sel.synthetic_entropy = batch.mean_final_entropy();
  sel.queries = compress(batch.samples, *m.extractor, m.features->pca);
  QueryMask mask = *req.mask;
  sel.indices = match_queries(*m.tree, sel.queries, mask, &sel.match_distances);
  sel.scores = entropies_of(*req.classifier, req.pool->samples(), sel.indices);
  sel.synthetic = std::move(batch.samples);
  return sel;
}

Selection select_asal_overgenerate(const SelectionRequest& req, std::size_t generated) {
  check_request(req);
  check_matching(req);
  if (generated < req.count) throw ArgumentError("over-generation must produce at least n samples");
  generated = std::min(generated, req.mask->unmasked_count());
  const auto& m = req.matching;
  SyntheticBatch batch = synthesize(req, generated);
  const Matrix queries = compress(batch.samples, *m.extractor, m.features->pca);
  QueryMask mask = *req.mask;
  std::vector<double> distances;
  const auto matched = match_queries(*m.tree, queries, mask, &distances);
  const auto scores = entropies_of(*req.classifier, req.pool->samples(), matched);

  Selection sel;
  sel.synthetic_entropy = batch.mean_final_entropy();
  sel.indices = top_by_score(matched, scores, req.count);
  sel.queries = Matrix(0, queries.cols());
  for (auto idx : sel.indices) {
    const auto pos = static_cast<std::size_t>(std::find(matched.begin(), matched.end(), idx) - matched.begin());
    sel.scores.push_back(scores[pos]);
    sel.queries.append_row(queries.row(pos));
    sel.match_distances.push_back(distances[pos]);
  }
  sel.synthetic = std::move(batch.samples);
  return sel;
}

Selection select_asal_neighbors(const SelectionRequest& req, std::size_t neighbors) {
  check_request(req);
  check_matching(req);
  if (neighbors == 0) throw ArgumentError("neighbour count must be >= 1");
  const auto& m = req.matching;
  SyntheticBatch batch = synthesize(req, req.count);
  const Matrix queries = compress(batch.samples, *m.extractor, m.features->pca);

  QueryMask mask = *req.mask;
  std::vector<std::size_t> candidates;
  std::vector<std::size_t> owner;  // query row each candidate came from
  std::vector<double> distances;
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    const std::size_t k = std::min(neighbors, mask.unmasked_count());
    if (k == 0) break;
    for (const auto& nb : m.tree->k_nearest(queries.row(q), k, mask)) {
      candidates.push_back(nb.index);
      owner.push_back(q);
      distances.push_back(std::sqrt(nb.distance_sq));
    }
    for (std::size_t c = candidates.size() - k; c < candidates.size(); ++c) mask.set(candidates[c]);
  }
  const auto scores = entropies_of(*req.classifier, req.pool->samples(), candidates);

  Selection sel;
  sel.synthetic_entropy = batch.mean_final_entropy();
  sel.indices = top_by_score(candidates, scores, req.count);
  sel.queries = Matrix(0, queries.cols());
  for (auto idx : sel.indices) {
    const auto pos = static_cast<std::size_t>(std::find(candidates.begin(), candidates.end(), idx) - candidates.begin());
    sel.scores.push_back(scores[pos]);
    sel.queries.append_row(queries.row(owner[pos]));
    sel.match_distances.push_back(distances[pos]);
  }
  sel.synthetic = std::move(batch.samples);
  return sel;
}

Selection select_coreset(const SelectionRequest& req) {
  check_request(req);
  const Matrix& points = req.coreset_features ? *req.coreset_features : req.pool->samples();
  if (points.rows() != req.pool->size()) throw DimensionError("core-set features do not cover the pool");

  // Labeled (masked) samples are the initial centers.
  std::vector<double> min_sq(points.rows(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < points.rows(); ++i)
    if (req.mask->masked(i)) kernels::parallel::update_min_distance(points, points.row(i), min_sq);

  QueryMask mask = *req.mask;
  Selection sel;
  for (std::size_t s = 0; s < req.count; ++s) {
    std::size_t best = points.rows();
    for (std::size_t i = 0; i < points.rows(); ++i) {
      if (mask.masked(i)) continue;
      if (best == points.rows() || min_sq[i] > min_sq[best]) best = i;
    }
    mask.set(best);
    sel.indices.push_back(best);
    sel.scores.push_back(std::sqrt(min_sq[best]));
    kernels::parallel::update_min_distance(points, points.row(best), min_sq);
  }
  return sel;
}

Selection select_gaal(const SelectionRequest& req, Oracle& oracle) {
  if (!req.pool || !req.classifier || req.count == 0) throw ArgumentError("incomplete selection request");
  if (!req.matching.generator || !req.rng) throw ConfigError("GAAL needs a generator");
  Selection sel;
  SyntheticBatch batch = synthesize(req, req.count);
  sel.synthetic_entropy = batch.mean_final_entropy();
  auto labels = oracle.label_synthetic(batch.samples, 0);
  Matrix kept(0, batch.samples.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) {
      ++sel.refused;
      continue;
    }
    kept.append_row(batch.samples.row(i));
    sel.synthetic_labels.push_back(labels[i]);
    sel.scores.push_back(batch.final_entropy[i]);
  }
  sel.synthetic = std::move(kept);
  return sel;
}

Selection select(StrategyKind kind, const SelectionRequest& req, Oracle* oracle) {
  const auto start = std::chrono::steady_clock::now();
  Selection sel;
  switch (kind) {
    case StrategyKind::kRandom: sel = select_random(req); break;
    case StrategyKind::kMaxEntropy: sel = select_max_entropy(req); break;
    case StrategyKind::kMinDistance: sel = select_min_distance(req); break;
    case StrategyKind::kAsal: sel = select_asal(req); break;
    case StrategyKind::kAsalGenerate:
      sel = select_asal_overgenerate(req, req.count * std::max<std::size_t>(1, req.matching.overgenerate_factor));
      break;
    case StrategyKind::kAsalNeighbors: sel = select_asal_neighbors(req, req.matching.neighbors); break;
    case StrategyKind::kCoreset: sel = select_coreset(req); break;
    case StrategyKind::kGaal:
      if (!oracle) throw ConfigError("GAAL selection needs an oracle");
      sel = select_gaal(req, *oracle);
      break;
  }
  sel.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sel;
}

std::vector<std::optional<int>> SimulatedOracle::label_pool(const Pool& pool,
                                                            std::span<const std::size_t> indices,
                                                            std::size_t) {
  std::vector<std::optional<int>> out;
  out.reserve(indices.size());
  for (auto i : indices) out.emplace_back(pool.hidden_labels().at(i));
  return out;
}

std::vector<std::optional<int>> SimulatedOracle::label_synthetic(const Matrix& samples, std::size_t) {
  std::vector<std::optional<int>> out;
  out.reserve(samples.rows());
  for (std::size_t r = 0; r < samples.rows(); ++r)
    out.push_back(labeler_ ? labeler_(samples.row(r)) : std::nullopt);
  return out;
}

}  // namespace asal
