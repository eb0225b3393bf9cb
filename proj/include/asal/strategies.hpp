#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asal/data.hpp"
#include "asal/features.hpp"
#include "asal/generator.hpp"
#include "asal/kdtree.hpp"
#include "asal/models.hpp"
#include "asal/oracle.hpp"
#include "asal/query_mask.hpp"
#include "asal/rng.hpp"
#include "asal/synthesis.hpp"

namespace asal {

enum class StrategyKind {
  kRandom,
  kMaxEntropy,
  kMinDistance,
  kAsal,
  kAsalGenerate,   // over-generate, keep the most uncertain matches
  kAsalNeighbors,  // k neighbours per synthetic sample, keep the most uncertain
  kCoreset,
  kGaal,
};

std::string_view to_string(StrategyKind kind);
StrategyKind strategy_from_string(std::string_view name);
/// "random, max-entropy, ..." for diagnostics.
std::string valid_strategy_names();
bool uses_generator(StrategyKind kind);
bool uses_matching(StrategyKind kind);

/// Everything ASAL needs that is prepared before active learning starts.
struct MatchingContext {
  const Generator* generator = nullptr;
  const FeatureExtractor* extractor = nullptr;
  const FeatureSet* features = nullptr;
  const KdTree* tree = nullptr;
  SynthesisConfig synthesis;
  std::size_t overgenerate_factor = 4;
  std::size_t neighbors = 5;
};

struct SelectionRequest {
  const Pool* pool = nullptr;
  /// Unavailable pool indices (labeled or skipped).
  const QueryMask* mask = nullptr;
  const Classifier* classifier = nullptr;
  std::size_t count = 0;
  Rng* rng = nullptr;
  MatchingContext matching;
  /// Pool-aligned features for core-set selection; the raw pool when null.
  const Matrix* coreset_features = nullptr;
};

struct Selection {
  std::vector<std::size_t> indices;  // distinct, previously unmasked
  std::vector<double> scores;        // the strategy's own score per index
  /// Synthetic samples: GAAL's labeled output, or ASAL's queries.
  Matrix synthetic;
  std::vector<std::optional<int>> synthetic_labels;  // GAAL only
  std::size_t refused = 0;                           // GAAL samples the oracle refused
  /// ASAL: compressed query matched to each index, for skip replacement.
  Matrix queries;
  std::vector<double> match_distances;
  double synthetic_entropy = 0.0;  // mean final entropy of the synthesis batch
  double seconds = 0.0;
};

Selection select_random(const SelectionRequest& req);
Selection select_max_entropy(const SelectionRequest& req);
Selection select_min_distance(const SelectionRequest& req);
Selection select_asal(const SelectionRequest& req);
Selection select_asal_overgenerate(const SelectionRequest& req, std::size_t generated);
Selection select_asal_neighbors(const SelectionRequest& req, std::size_t neighbors);
Selection select_coreset(const SelectionRequest& req);
Selection select_gaal(const SelectionRequest& req, Oracle& oracle);

/// Dispatches on kind and records wall-clock selection time. `oracle` is
/// required for GAAL only.
Selection select(StrategyKind kind, const SelectionRequest& req, Oracle* oracle = nullptr);

/// Next-nearest unmasked pool index for each query row, masking as it goes.
std::vector<std::size_t> match_queries(const KdTree& tree, const Matrix& queries, QueryMask& mask,
                                       std::vector<double>* distances = nullptr);

/// Indices of the `count` largest scores (ties to the lowest index) among
/// the candidates.
std::vector<std::size_t> top_by_score(std::span<const std::size_t> candidates,
                                      std::span<const double> scores, std::size_t count);

}  // namespace asal
