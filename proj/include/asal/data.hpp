#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "asal/matrix.hpp"

namespace asal {

struct ImageShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

/// Unlabeled candidate samples plus the hidden labels only an oracle reveals.
class Pool {
 public:
  Pool() = default;
  Pool(Matrix samples, std::vector<int> labels, std::size_t classes,
       std::optional<ImageShape> image = std::nullopt);

  const Matrix& samples() const { return samples_; }
  std::size_t size() const { return samples_.rows(); }
  std::size_t width() const { return samples_.cols(); }
  std::size_t classes() const { return classes_; }
  const std::optional<ImageShape>& image_shape() const { return image_; }

  /// Ground truth. Reserved for oracles, evaluation and tests.
  const std::vector<int>& hidden_labels() const { return labels_; }

  friend bool operator==(const Pool&, const Pool&) = default;

 private:
  Matrix samples_;
  std::vector<int> labels_;
  std::size_t classes_ = 0;
  std::optional<ImageShape> image_;
};

/// Ground-truth labeler for points outside the pool (simulated GAAL oracle).
/// Returns nullopt when it refuses.
using LabelFunction = std::function<std::optional<int>(std::span<const double>)>;

struct Dataset {
  Pool pool;
  Pool test;
  LabelFunction labeler;  // may be empty
};

struct GaussianMixtureSpec {
  std::size_t components = 8;
  std::size_t classes = 8;
  std::size_t dim = 10;
  /// Explicit means (components x dim). When empty, means are drawn as
  /// `separation` times i.i.d. standard normal vectors normalised to unit
  /// length, so typical inter-mean distance is about separation * sqrt(2).
  Matrix means;
  double separation = 6.0;
  /// Isotropic per-component standard deviation. Overlap grows with
  /// spread / separation. Zero gives point masses.
  double spread = 1.0;
  std::vector<double> spreads;       // per component; overrides spread
  std::vector<int> class_map;        // component -> class; default k mod classes
  std::vector<double> weights;       // component weights; default uniform
  std::size_t pool_size = 10000;
  std::size_t test_size = 2000;
  std::uint64_t seed = 0;
};

/// Draws pool then test from one stream, so the two sets are disjoint draws.
/// The labeler assigns the class of the nearest component mean.
Dataset make_gaussian_mixture(const GaussianMixtureSpec& spec);

struct TwoMoonsSpec {
  double noise = 0.1;
  std::size_t pool_size = 1000;
  std::size_t test_size = 500;
  std::uint64_t seed = 0;
};
Dataset make_two_moons(const TwoMoonsSpec& spec);

/// IDX files: big-endian magic 0x00000803 (u8 images, n x rows x cols) and
/// 0x00000801 (u8 labels, n). Pixels are scaled to [0, 1].
Pool load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
/// Writes pixels as round(v * 255) clamped to [0, 255].
void save_idx(const Pool& pool, const std::filesystem::path& images,
              const std::filesystem::path& labels);

struct CsvOptions {
  std::string label_column = "label";  // header name, or zero-based index when no header
  std::optional<bool> has_header;      // auto-detect when unset
  char delimiter = ',';
};
/// Numeric columns become features in file order; labels are remapped to
/// 0..m-1 in ascending order of the integer label values.
Pool load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// Pool cache, little-endian:
///   "ASALPL" magic, u16 version = 1, u64 rows, u64 cols, u64 classes,
///   u64 image_rows, u64 image_cols (0 when not an image pool),
///   f64 samples[rows*cols], u64 labels[rows]
void save_pool(const std::filesystem::path& path, const Pool& pool);
Pool load_pool(const std::filesystem::path& path);

/// Replicates the pool to `size` rows, adding N(0, jitter^2) noise to every
/// copy beyond the first pass. Used for run-time scaling sweeps.
Pool replicate_with_jitter(const Pool& base, std::size_t size, double jitter, std::uint64_t seed);

}  // namespace asal
