#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "asal/error.hpp"
#include "asal/features.hpp"
#include "asal/models.hpp"
#include "asal/pca.hpp"
#include "test_util.hpp"

using namespace asal;
using asal::test::random_matrix;

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_orthonormal(const Matrix& rows, double tol) {
  for (std::size_t i = 0; i < rows.rows(); ++i)
    for (std::size_t j = 0; j < rows.rows(); ++j)
      CHECK(std::abs(dot(rows.row(i), rows.row(j)) - (i == j ? 1.0 : 0.0)) <= tol);
}

// Sample covariance by definition.
Matrix covariance(const Matrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(r, j) / n;
  Matrix c(d, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) c(i, j) += (x(r, i) - mean[i]) * (x(r, j) - mean[j]) / (n - 1);
  return c;
}

}  // namespace

TEST_CASE("PCA on points along the diagonal") {
  const Matrix x{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  const PcaModel p = fit_pca(x, 1);
  CHECK(p.mean == Matrix{{1.5, 1.5}});
  CHECK(p.components(0, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(p.components(0, 1) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(p.explained_variance[0] == doctest::Approx(10.0 / 3.0).epsilon(1e-12));
  const Matrix f = p.project(x);
  CHECK(f(0, 0) == doctest::Approx(-1.5 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(f(3, 0) == doctest::Approx(1.5 * std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("PCA on three collinear points") {
  const PcaModel p = fit_pca(Matrix{{0, 0}, {1, 1}, {2, 2}}, 1);
  CHECK(p.mean == Matrix{{1.0, 1.0}});
  CHECK(std::abs(p.components(0, 0) - std::sqrt(0.5)) <= 1e-12);
  CHECK(std::abs(p.components(0, 1) - std::sqrt(0.5)) <= 1e-12);
}

TEST_CASE("data on an affine subspace reconstructs exactly") {
  Rng rng(23);
  const Matrix basis = random_matrix(2, 6, rng);
  Matrix x = matmul(random_matrix(100, 2, rng), basis);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) += 3.0 + c;
  const PcaModel p = fit_pca(x, 2);
  const Matrix back = p.reconstruct(p.project(x));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back.data()[i] - x.data()[i]) <= 1e-9);
  CHECK(p.explained_variance[0] >= p.explained_variance[1]);
}

TEST_CASE("PCA on axis-aligned points orders components by variance") {
  const Matrix x{{-2, 0}, {2, 0}, {0, -1}, {0, 1}};
  const PcaModel p = fit_pca(x, 2);
  CHECK(std::abs(p.components(0, 0) - 1.0) <= 1e-12);
  CHECK(std::abs(p.components(1, 1) - 1.0) <= 1e-12);
  CHECK(p.explained_variance[0] == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
  CHECK(p.explained_variance[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("Jacobi eigendecomposition reconstructs the matrix") {
  Rng rng(17);
  const Matrix a = random_matrix(6, 6, rng);
  const Matrix s = matmul_tn(a, a);
  const SymmetricEigen e = jacobi_eigen(s);
  check_orthonormal(e.vectors, 1e-10);
  for (std::size_t i = 1; i < e.values.size(); ++i) CHECK(e.values[i - 1] >= e.values[i]);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k < 6; ++k) v += e.vectors(k, i) * e.values[k] * e.vectors(k, j);
      CHECK(std::abs(v - s(i, j)) <= 1e-9 * (1.0 + std::abs(s(i, j))));
    }
}

TEST_CASE("PCA properties on random data") {
  Rng rng(3);
  Matrix x = random_matrix(300, 5, rng);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    x(r, 0) *= 4.0;
    x(r, 2) += 7.0;
  }
  const Matrix cov = covariance(x);
  SUBCASE("components are orthonormal eigenvectors of the covariance") {
    const PcaModel p = fit_pca(x, 3);
    check_orthonormal(p.components, 1e-10);
    for (std::size_t c = 0; c < 3; ++c) {
      const Matrix v = matmul_nt(cov, p.components.slice_rows(c, 1));
      for (std::size_t j = 0; j < 5; ++j)
        CHECK(std::abs(v(j, 0) - p.explained_variance[c] * p.components(c, j)) <= 1e-9);
    }
  }
  SUBCASE("full-width projection is an isometry") {
    const PcaModel p = fit_pca(x, 5);
    const Matrix f = p.project(x);
    for (std::size_t i = 0; i < 20; ++i)
      CHECK(squared_distance(f.row(i), f.row(i + 1)) ==
            doctest::Approx(squared_distance(x.row(i), x.row(i + 1))).epsilon(1e-10));
    const Matrix back = p.reconstruct(f);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back.data()[i] - x.data()[i]) <= 1e-10);
  }
  SUBCASE("the mean projects to zero") {
    const PcaModel p = fit_pca(x, 2);
    const Matrix f = p.project(p.mean);
    for (double v : f.data()) CHECK(std::abs(v) <= 1e-12);
  }
  SUBCASE("truncated projection preserves the leading coordinates") {
    const Matrix f5 = fit_pca(x, 5).project(x);
    const Matrix f2 = fit_pca(x, 2).project(x);
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < 2; ++c) CHECK(f2(r, c) == f5(r, c));
  }
}

TEST_CASE("PCA with k above the data rank completes an orthonormal basis") {
  Matrix x(10, 3);
  for (std::size_t r = 0; r < 10; ++r) {
    x(r, 0) = r;
    x(r, 1) = 2.0 * r;
    x(r, 2) = -1.0 * r;
  }
  const PcaModel p = fit_pca(x, 3);
  check_orthonormal(p.components, 1e-10);
  CHECK(p.explained_variance[1] <= 1e-12);
  CHECK(p.explained_variance[2] <= 1e-12);
  const Matrix f = p.project(x);
  for (std::size_t r = 0; r < 10; ++r) {
    CHECK(std::abs(f(r, 1)) <= 1e-9);
    CHECK(std::abs(f(r, 2)) <= 1e-9);
  }
}

TEST_CASE("PCA errors and width clamp") {
  CHECK_THROWS_AS(fit_pca(Matrix{{1, 2}}, 1), ArgumentError);
  CHECK_THROWS_AS(fit_pca(Matrix{{1, 2}, {3, 4}}, 3), ArgumentError);
  CHECK_THROWS_AS(fit_pca(Matrix{{1, 2}, {3, 4}}, 0), ArgumentError);
  CHECK(clamp_pca_width(50, 8) == 8);
  CHECK(clamp_pca_width(5, 8) == 5);
}

TEST_CASE("feature extractors") {
  Rng rng(5);
  const Matrix x = random_matrix(40, 6, rng);
  SUBCASE("raw is the identity") {
    const auto e = FeatureExtractor::raw(6);
    CHECK(e.extract(x) == x);
    CHECK(e.output_width() == 6);
    CHECK_THROWS_AS(e.extract(Matrix(2, 5)), DimensionError);
  }
  SUBCASE("autoencoder uses the encoder") {
    AutoencoderConfig cfg;
    cfg.feature_width = 3;
    cfg.train.epochs = 2;
    const Autoencoder ae = train_autoencoder(x, cfg);
    const auto e = FeatureExtractor::autoencoder(ae);
    CHECK(e.kind() == ExtractorKind::kAutoencoder);
    CHECK(e.output_width() == 3);
    CHECK(e.extract(x) == ae.encode(x));
  }
  SUBCASE("classifier features go stale after retraining") {
    std::vector<int> y(40);
    for (std::size_t i = 0; i < 40; ++i) y[i] = x(i, 0) > 0.0;
    ClassifierConfig cfg;
    cfg.hidden = {4};
    cfg.train.epochs = 5;
    const Classifier h1 = train_classifier(x, y, 2, cfg);
    cfg.train.seed = 1;
    const Classifier h2 = train_classifier(x, y, 2, cfg);
    const auto e1 = FeatureExtractor::classifier(h1);
    CHECK(e1.depends_on_classifier());
    CHECK(e1.extract(x) == h1.penultimate(x));
    CHECK_FALSE(e1.extract(x) == FeatureExtractor::classifier(h2).extract(x));
  }
  SUBCASE("unbound extractor refuses to run") {
    const auto e = FeatureExtractor::unbound(ExtractorKind::kCritic, 6);
    CHECK_THROWS_AS(e.extract(x), ConfigError);
  }
  CHECK(extractor_kind_from_string("critic") == ExtractorKind::kCritic);
  CHECK_THROWS_AS(extractor_kind_from_string("pixels"), ConfigError);
}

TEST_CASE("feature set build, compress and file round trip") {
  Rng rng(9);
  const Matrix pool = random_matrix(50, 4, rng);
  const auto ex = FeatureExtractor::raw(4);
  const PcaModel pca = fit_feature_pca(pool, ex, 10);
  CHECK(pca.output_width() == 4);
  const FeatureSet set = build_feature_set(pool, ex, pca);
  CHECK(set.size() == 50);
  const Matrix one = compress(pool.slice_rows(7, 1), ex, pca);
  for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(one(0, c) - set.features(7, c)) <= 1e-12);

  const auto path = std::filesystem::temp_directory_path() / "asal_features_test.bin";
  save_feature_set(path, set);
  const FeatureSet back = load_feature_set(path);
  CHECK(back.features == set.features);
  CHECK(back.pca.mean == set.pca.mean);
  CHECK(back.pca.components == set.pca.components);
  CHECK(back.pca.explained_variance == set.pca.explained_variance);
  std::ofstream(path, std::ios::binary) << "NOTAFS";
  CHECK_THROWS_AS(load_feature_set(path), ParseError);
  std::filesystem::remove(path);
}
