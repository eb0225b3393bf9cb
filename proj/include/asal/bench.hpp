#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asal/data.hpp"
#include "asal/experiment.hpp"
#include "asal/generator.hpp"
#include "asal/strategies.hpp"
#include "asal/synthesis.hpp"

namespace asal {

/// Scaling workload. Samples lie near a `latent_dim`-dimensional linear image
/// of a Gaussian mixture embedded in `width` dimensions, so compressed
/// features have low intrinsic dimension. Larger pools replicate the base
/// latents with N(0, jitter^2) noise before embedding, which keeps the
/// replicas spread over the data manifold instead of stacked on the base points.
struct BenchConfig {
  std::size_t base_size = 10000;
  std::size_t latent_dim = 4;
  std::size_t width = 64;
  std::size_t classes = 8;
  double separation = 6.0;
  double noise = 0.01;  // off-manifold noise per embedded coordinate
  double jitter = 0.2;  // replication noise in latent coordinates
  std::size_t pca_dim = 50;
  std::size_t count = 50;  // samples requested per selection
  std::size_t train_samples = 500;
  SynthesisConfig synthesis;
  SplitRule split_rule = SplitRule::kMaxSpread;
  std::uint64_t seed = 0;
};

struct TimingRecord {
  std::string strategy;
  std::size_t pool_size = 0;
  std::size_t requested = 0;
  std::size_t repeat = 0;
  double seconds = 0.0;
  PreprocessTimes preprocess;
  double nodes_visited = 0.0;  // mean per query; matching strategies only
  std::string error;           // non-empty for a failed measurement
};

struct SizeSummary {
  std::size_t pool_size = 0;
  double median_seconds = 0.0;
  double median_nodes_visited = 0.0;
  bool failed = false;
};

struct ScalingReport {
  std::string strategy;
  std::vector<TimingRecord> records;
  std::vector<SizeSummary> sizes;
  /// Least-squares slope of log(time) against log(size); unset below 4 sizes.
  std::optional<double> slope;
};

/// The workload's base latents and the linear embedding, which doubles as
/// the generator.
struct BenchWorkload {
  Pool latent;  // base_size x latent_dim, labeled by mixture component
  Mlp decoder;  // latent -> sample, one linear layer
};
BenchWorkload make_bench_workload(const BenchConfig& config);
/// Embedded pool of `size` rows; the first base_size rows are the base itself.
Pool make_bench_pool(const BenchWorkload& work, std::size_t size, const BenchConfig& config);

/// Median selection time per pool size. Classifier training and
/// pre-processing are excluded from the timed section, which runs on one
/// thread after one untimed warm-up call. Requires ascending sizes and
/// repeats >= 3.
ScalingReport time_selection(StrategyKind strategy, std::span<const std::size_t> sizes,
                             std::size_t repeats, const BenchConfig& config = {});

double median(std::vector<double> values);
std::optional<double> loglog_slope(std::span<const double> sizes, std::span<const double> times);

/// Smallest cycle count c with preproc + c * fast < c * slow; unset when
/// fast >= slow.
std::optional<std::size_t> transition_point(double preproc, double fast, double slow);

void write_timing_jsonl(const std::filesystem::path& path, const std::vector<ScalingReport>& reports);
/// Columns: size,repeat,strategy,time
void write_timing_csv(const std::filesystem::path& path, const std::vector<ScalingReport>& reports);

}  // namespace asal
