#include "asal/features.hpp"

#include <fstream>
#include <string>

#include "asal/binary_io.hpp"
#include "asal/error.hpp"
#include "asal/kernels.hpp"

namespace asal {

std::string_view to_string(ExtractorKind kind) {
  switch (kind) {
    case ExtractorKind::kRaw: return "raw";
    case ExtractorKind::kAutoencoder: return "autoencoder";
    case ExtractorKind::kCritic: return "critic";
    case ExtractorKind::kClassifier: return "classifier";
  }
  return "unknown";
}

ExtractorKind extractor_kind_from_string(std::string_view name) {
  for (auto k : {ExtractorKind::kRaw, ExtractorKind::kAutoencoder, ExtractorKind::kCritic,
                 ExtractorKind::kClassifier})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown extractor '" + std::string(name) +
                    "' (valid: raw, autoencoder, critic, classifier)");
}

FeatureExtractor::FeatureExtractor(ExtractorKind kind, std::size_t input_width,
                                   std::shared_ptr<const Mlp> net, std::size_t stop)
    : kind_(kind), input_width_(input_width), net_(std::move(net)), stop_(stop) {}

FeatureExtractor FeatureExtractor::raw(std::size_t width) {
  return FeatureExtractor(ExtractorKind::kRaw, width, nullptr, 0);
}

FeatureExtractor FeatureExtractor::autoencoder(const Autoencoder& model) {
  auto net = std::make_shared<const Mlp>(model.encoder());
  const std::size_t stop = net->layer_count();
  const std::size_t width = net->input_width();
  return FeatureExtractor(ExtractorKind::kAutoencoder, width, std::move(net), stop);
}

FeatureExtractor FeatureExtractor::critic(const Critic& model) {
  return FeatureExtractor(ExtractorKind::kCritic, model.network().input_width(),
                          std::make_shared<const Mlp>(model.network()), model.feature_stop());
}

FeatureExtractor FeatureExtractor::classifier(const Classifier& model) {
  return FeatureExtractor(ExtractorKind::kClassifier, model.input_width(),
                          std::make_shared<const Mlp>(model.network()), model.penultimate_stop());
}

FeatureExtractor FeatureExtractor::unbound(ExtractorKind kind, std::size_t input_width) {
  return FeatureExtractor(kind, input_width, nullptr, 0);
}

std::size_t FeatureExtractor::output_width() const {
  if (kind_ == ExtractorKind::kRaw) return input_width_;
  if (!net_) throw ConfigError("extractor '" + std::string(to_string(kind_)) + "' has no model");
  return net_->width_at(stop_);
}

Matrix FeatureExtractor::extract(const Matrix& x) const {
  if (x.cols() != input_width_)
    throw DimensionError("extractor expects width " + std::to_string(input_width_) + ", got " +
                         std::to_string(x.cols()));
  if (kind_ == ExtractorKind::kRaw) return x;
  if (!net_) throw ConfigError("extractor '" + std::string(to_string(kind_)) + "' has no model");
  return kernels::parallel::map_rows(*net_, x, stop_);
}

PcaModel fit_feature_pca(const Matrix& pool, const FeatureExtractor& extractor, std::size_t k) {
  const Matrix features = extractor.extract(pool);
  return fit_pca(features, clamp_pca_width(k, features.cols()));
}

FeatureSet build_feature_set(const Matrix& pool, const FeatureExtractor& extractor,
                             const PcaModel& pca) {
  FeatureSet set;
  set.features = pca.project(extractor.extract(pool));
  set.pca = pca;
  return set;
}

Matrix compress(const Matrix& x, const FeatureExtractor& extractor, const PcaModel& pca) {
  return kernels::serial::project(extractor.extract(x), pca.mean, pca.components);
}

void save_feature_set(const std::filesystem::path& path, const FeatureSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  binio::write_magic(out, "ASALFS", 1);
  binio::write_u64(out, set.features.rows());
  binio::write_u64(out, set.pca.components.rows());
  binio::write_u64(out, set.pca.mean.cols());
  binio::write_f64s(out, set.pca.mean.data());
  binio::write_f64s(out, set.pca.components.data());
  binio::write_f64s(out, set.pca.explained_variance);
  binio::write_f64s(out, set.features.data());
  if (!out) throw IoError("failed writing " + path.string());
}

FeatureSet load_feature_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  binio::read_magic(in, "ASALFS", 1);
  const auto rows = binio::read_u64(in);
  const auto k = binio::read_u64(in);
  const auto d = binio::read_u64(in);
  if (k > d) throw ParseError("feature set has k > d");
  FeatureSet set;
  set.pca.mean = Matrix(1, d);
  set.pca.components = Matrix(k, d);
  set.pca.explained_variance.resize(k);
  set.features = Matrix(rows, k);
  binio::read_f64s(in, set.pca.mean.data());
  binio::read_f64s(in, set.pca.components.data());
  binio::read_f64s(in, set.pca.explained_variance);
  binio::read_f64s(in, set.features.data());
  return set;
}

}  // namespace asal
