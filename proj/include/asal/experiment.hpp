#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "asal/data.hpp"
#include "asal/features.hpp"
#include "asal/generator.hpp"
#include "asal/kdtree.hpp"
#include "asal/models.hpp"
#include "asal/oracle.hpp"
#include "asal/strategies.hpp"
#include "asal/synthesis.hpp"

namespace asal {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kMetricsSchemaVersion = 1;

enum class DatasetKind { kGaussianMixture, kTwoMoons, kCsv, kIdx };
std::string_view to_string(DatasetKind kind);

struct DatasetConfig {
  DatasetKind kind = DatasetKind::kGaussianMixture;
  GaussianMixtureSpec mixture;
  TwoMoonsSpec moons;
  std::filesystem::path csv;
  CsvOptions csv_options;
  std::filesystem::path idx_images;
  std::filesystem::path idx_labels;
  std::size_t test_size = 0;  // csv / idx: rows held out after a seeded shuffle
  std::uint64_t seed = 0;     // csv / idx split seed
};

struct GeneratorConfig {
  enum class Kind { kMixture, kDecoder } kind = Kind::kMixture;
  MixtureFitConfig mixture;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  ClassifierConfig classifier;
  StrategyKind strategy = StrategyKind::kAsal;
  ExtractorKind extractor = ExtractorKind::kAutoencoder;
  std::size_t pca_dim = 50;
  std::size_t budget = 1000;
  std::size_t new_per_cycle = 50;
  std::size_t initial = 100;
  bool stratified_initial = false;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  enum class OracleKind { kSimulated, kHuman } oracle = OracleKind::kSimulated;
  GeneratorConfig generator;
  SynthesisConfig synthesis;
  AutoencoderConfig autoencoder;
  CriticConfig critic;
  std::size_t overgenerate_factor = 4;
  std::size_t neighbors = 5;
  SplitRule split_rule = SplitRule::kMaxSpread;

  /// Selection cycles a complete run performs.
  std::size_t planned_cycles() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Config file: a JSON object with "schema_version": 1. Unknown fields are
/// errors. See README for the field list.
ExperimentConfig config_from_json(const nlohmann::json& doc);
/// Parse errors report the line; field errors the JSON path.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(std::string_view text);
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
/// 64-bit FNV-1a of the canonical config JSON, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

Dataset load_dataset(const DatasetConfig& config);

/// One record per classifier evaluation.
struct CycleMetrics {
  std::uint64_t seed = 0;
  std::string strategy;
  std::size_t cycle = 0;
  std::size_t labeled = 0;  // training-set size the classifier was trained on
  double accuracy = 0.0;
  /// Mean entropy of the samples chosen this cycle under this cycle's
  /// classifier; absent on the final record.
  std::optional<double> new_sample_entropy;
  std::size_t selected = 0;
  std::size_t skipped = 0;
  std::vector<std::size_t> class_counts;  // training-set labels per class
  std::optional<double> synthetic_entropy;
  double selection_seconds = 0.0;  // wall time, excluded from determinism checks
};

/// One JSON line, stable field order.
nlohmann::ordered_json metrics_to_json(const CycleMetrics& m);
CycleMetrics metrics_from_json(const nlohmann::json& j);

struct PreprocessTimes {
  double generator = 0.0;
  double autoencoder = 0.0;
  double critic = 0.0;
  double extraction = 0.0;
  double pca = 0.0;
  double tree = 0.0;
  double total() const { return generator + autoencoder + critic + extraction + pca + tree; }
};

/// Everything prepared before the first cycle. Depends on the pool and the
/// config only, so runs with different seeds may share it.
struct AsalResources {
  std::unique_ptr<Generator> generator;
  std::optional<Autoencoder> autoencoder;
  std::optional<Critic> critic;
  std::optional<FeatureExtractor> extractor;  // unset for classifier features
  std::optional<FeatureSet> features;
  std::optional<KdTree> tree;
  PreprocessTimes times;
};

AsalResources prepare_asal(const Pool& pool, const ExperimentConfig& config);

enum class RunStatus { kCompleted, kExhausted };
std::string_view to_string(RunStatus status);

struct RunResult {
  std::vector<CycleMetrics> cycles;
  RunStatus status = RunStatus::kCompleted;
  std::vector<std::size_t> labeled_indices;  // pool indices, in labeling order
  std::vector<std::size_t> skipped_indices;
  std::size_t synthetic_labeled = 0;  // GAAL
  std::optional<Classifier> final_classifier;
};

struct RunHooks {
  std::function<void(const CycleMetrics&)> on_cycle;
  /// "training", "selecting", "labeling", "completed".
  std::function<void(std::string_view)> on_phase;
};

/// Retrain from scratch, evaluate, select, annotate, extend, until the budget
/// is reached. `resources` may be null; it is then prepared on demand.
RunResult run_experiment(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed,
                         Oracle& oracle, const AsalResources* resources = nullptr,
                         const RunHooks& hooks = {});

/// Argmax accuracy, ties to the lowest class index.
double evaluate(const Classifier& classifier, const Pool& test);

struct SeedAggregate {
  std::vector<double> mean;
  std::vector<double> min;
  std::vector<double> max;
};
/// Per-checkpoint statistics across seeds. Throws AlignmentError on ragged input.
SeedAggregate aggregate_seeds(const std::vector<std::vector<double>>& series);
std::vector<double> accuracy_series(const RunResult& run);

void write_metrics_jsonl(const std::filesystem::path& path, const std::vector<CycleMetrics>& cycles);
std::vector<CycleMetrics> read_metrics_jsonl(const std::filesystem::path& path);

}  // namespace asal
