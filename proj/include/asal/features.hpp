#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string_view>

#include "asal/matrix.hpp"
#include "asal/mlp.hpp"
#include "asal/models.hpp"
#include "asal/pca.hpp"

namespace asal {

enum class ExtractorKind { kRaw, kAutoencoder, kCritic, kClassifier };

std::string_view to_string(ExtractorKind kind);
ExtractorKind extractor_kind_from_string(std::string_view name);

/// Fixed map from samples into the matching space.
///
/// raw          identity
/// autoencoder  encoder output
/// critic       critic penultimate layer
/// classifier   classifier penultimate layer; stale after every retraining, so
///              features must be rebuilt each cycle (linear cost in the pool)
class FeatureExtractor {
 public:
  static FeatureExtractor raw(std::size_t width);
  static FeatureExtractor autoencoder(const Autoencoder& model);
  static FeatureExtractor critic(const Critic& model);
  static FeatureExtractor classifier(const Classifier& model);
  /// A non-raw kind without a model; extract() then throws ConfigError.
  static FeatureExtractor unbound(ExtractorKind kind, std::size_t input_width);

  ExtractorKind kind() const { return kind_; }
  std::size_t input_width() const { return input_width_; }
  std::size_t output_width() const;
  bool depends_on_classifier() const { return kind_ == ExtractorKind::kClassifier; }

  Matrix extract(const Matrix& x) const;

 private:
  FeatureExtractor(ExtractorKind kind, std::size_t input_width, std::shared_ptr<const Mlp> net,
                   std::size_t stop);

  ExtractorKind kind_;
  std::size_t input_width_;
  std::shared_ptr<const Mlp> net_;
  std::size_t stop_ = 0;
};

/// Compressed features of every pool sample, row i <-> pool index i.
struct FeatureSet {
  Matrix features;
  PcaModel pca;

  std::size_t size() const { return features.rows(); }
  std::size_t width() const { return features.cols(); }
};

/// Fits PCA on the extracted pool features (k clamped to the feature width).
PcaModel fit_feature_pca(const Matrix& pool, const FeatureExtractor& extractor, std::size_t k);

FeatureSet build_feature_set(const Matrix& pool, const FeatureExtractor& extractor, const PcaModel& pca);

/// Extract then project, for synthetic samples.
Matrix compress(const Matrix& x, const FeatureExtractor& extractor, const PcaModel& pca);

/// Binary feature-set file, little-endian:
///   "ASALFS" magic (6 bytes), u16 version = 1,
///   u64 rows, u64 k, u64 d,
///   f64 mean[d], f64 components[k*d], f64 explained_variance[k], f64 features[rows*k]
void save_feature_set(const std::filesystem::path& path, const FeatureSet& set);
FeatureSet load_feature_set(const std::filesystem::path& path);

}  // namespace asal
