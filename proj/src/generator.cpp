#include "asal/generator.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "asal/error.hpp"

namespace asal {

namespace {

void require_finite_latent(const Matrix& z, std::size_t latent_dim) {
  if (z.cols() != latent_dim)
    throw DimensionError("latent width " + std::to_string(z.cols()) + ", generator expects " +
                         std::to_string(latent_dim));
  if (!z.all_finite()) throw NumericError("non-finite latent passed to generator");
}

}  // namespace

Matrix sample_latent(std::size_t count, std::size_t latent_dim, Rng& rng) {
  if (count == 0 || latent_dim == 0) throw ArgumentError("sample_latent needs count, n >= 1");
  return rng.normal_matrix(count, latent_dim);
}

MixtureGenerator::MixtureGenerator(Matrix means, Matrix scales, double temperature)
    : means_(std::move(means)), scales_(std::move(scales)), temperature_(temperature) {
  if (means_.rows() == 0 || means_.cols() == 0) throw ConfigError("mixture generator needs K >= 1");
  if (scales_.rows() != means_.rows() || scales_.cols() != means_.cols())
    throw DimensionError("mixture scales must match means");
  if (!(temperature_ > 0.0)) throw ConfigError("mixture temperature must be positive");
}

std::size_t MixtureGenerator::latent_dim() const {
  return components() > 1 ? components() + output_dim() : output_dim();
}

Matrix MixtureGenerator::generate(const Matrix& z) const {
  require_finite_latent(z, latent_dim());
  const std::size_t k_count = components();
  const std::size_t d = output_dim();
  const std::size_t gate_width = k_count > 1 ? k_count : 0;
  Matrix out(z.rows(), d);
  std::vector<double> w(k_count, 1.0);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto zr = z.row(r);
    if (gate_width) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < k_count; ++k) mx = std::max(mx, zr[k] / temperature_);
      double sum = 0.0;
      for (std::size_t k = 0; k < k_count; ++k) sum += (w[k] = std::exp(zr[k] / temperature_ - mx));
      for (double& v : w) v /= sum;
    }
    auto o = out.row(r);
    for (std::size_t k = 0; k < k_count; ++k) {
      auto mu = means_.row(k);
      auto s = scales_.row(k);
      for (std::size_t j = 0; j < d; ++j) o[j] += w[k] * (mu[j] + s[j] * zr[gate_width + j]);
    }
  }
  return out;
}

Matrix MixtureGenerator::vjp(const Matrix& z, const Matrix& upstream) const {
  require_finite_latent(z, latent_dim());
  if (upstream.rows() != z.rows() || upstream.cols() != output_dim())
    throw DimensionError("generator vjp upstream shape mismatch");
  const std::size_t k_count = components();
  const std::size_t d = output_dim();
  const std::size_t gate_width = k_count > 1 ? k_count : 0;
  Matrix out(z.rows(), latent_dim());
  std::vector<double> w(k_count, 1.0);
  std::vector<double> gc(k_count);  // upstream . (mu_k + s_k * shape)
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto zr = z.row(r);
    auto g = upstream.row(r);
    auto o = out.row(r);
    if (gate_width) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < k_count; ++k) mx = std::max(mx, zr[k] / temperature_);
      double sum = 0.0;
      for (std::size_t k = 0; k < k_count; ++k) sum += (w[k] = std::exp(zr[k] / temperature_ - mx));
      for (double& v : w) v /= sum;
    }
    double mean_gc = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      auto mu = means_.row(k);
      auto s = scales_.row(k);
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        acc += g[j] * (mu[j] + s[j] * zr[gate_width + j]);
        o[gate_width + j] += g[j] * w[k] * s[j];
      }
      gc[k] = acc;
      mean_gc += w[k] * acc;
    }
    for (std::size_t k = 0; k < gate_width; ++k) o[k] = w[k] * (gc[k] - mean_gc) / temperature_;
  }
  return out;
}

MixtureGenerator fit_mixture_generator(const Matrix& samples, const MixtureFitConfig& config) {
  const std::size_t n = samples.rows();
  const std::size_t d = samples.cols();
  const std::size_t k_count = config.components;
  if (k_count == 0 || n < k_count) throw ArgumentError("need at least K samples to fit K components");
  Rng rng(config.seed);

  // k-means++ seeding.
  Matrix centers(k_count, d);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.index(n);
  std::copy(samples.row(first).begin(), samples.row(first).end(), centers.row(0).begin());
  for (std::size_t c = 1; c < k_count; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], squared_distance(samples.row(i), centers.row(c - 1)));
      total += best[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        target -= best[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(n);
    }
    std::copy(samples.row(pick).begin(), samples.row(pick).end(), centers.row(c).begin());
  }

  std::vector<std::size_t> assign(n, 0);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t arg = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k_count; ++c) {
        const double dist = squared_distance(samples.row(i), centers.row(c));
        if (dist < bd) {
          bd = dist;
          arg = c;
        }
      }
      if (assign[i] != arg) changed = true;
      assign[i] = arg;
    }
    Matrix sums(k_count, d);
    std::vector<std::size_t> counts(k_count, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = sums.row(assign[i]);
      auto x = samples.row(i);
      for (std::size_t j = 0; j < d; ++j) s[j] += x[j];
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k_count; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its center
      for (std::size_t j = 0; j < d; ++j) centers(c, j) = sums(c, j) / static_cast<double>(counts[c]);
    }
    if (it > 0 && !changed) break;
  }

  Matrix scales(k_count, d);
  std::vector<std::size_t> counts(k_count, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = samples.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = x[j] - centers(assign[i], j);
      scales(assign[i], j) += dev * dev;
    }
    ++counts[assign[i]];
  }
  for (std::size_t c = 0; c < k_count; ++c)
    for (std::size_t j = 0; j < d; ++j)
      scales(c, j) = counts[c] ? std::sqrt(scales(c, j) / static_cast<double>(counts[c])) : 0.0;

  return MixtureGenerator(std::move(centers), std::move(scales), config.temperature);
}

DecoderGenerator::DecoderGenerator(Mlp decoder) : decoder_(std::move(decoder)) {}

Matrix DecoderGenerator::generate(const Matrix& z) const {
  require_finite_latent(z, latent_dim());
  return decoder_.forward(z);
}

Matrix DecoderGenerator::vjp(const Matrix& z, const Matrix& upstream) const {
  require_finite_latent(z, latent_dim());
  auto cache = decoder_.forward_cached(z);
  return decoder_.backward(cache, upstream).input;
}

}  // namespace asal
