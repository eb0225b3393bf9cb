#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>

#include "asal/matrix.hpp"
#include "asal/mlp.hpp"
#include "asal/rng.hpp"

namespace asal {

/// Differentiable map from latent space to sample space, x = G(z).
class Generator {
 public:
  virtual ~Generator() = default;

  virtual std::size_t latent_dim() const = 0;
  virtual std::size_t output_dim() const = 0;

  /// One sample per latent row. Throws NumericError on non-finite z.
  virtual Matrix generate(const Matrix& z) const = 0;

  /// Vector-Jacobian product: row i holds upstream[i] * dG/dz evaluated at z[i].
  virtual Matrix vjp(const Matrix& z, const Matrix& upstream) const = 0;
};

/// z ~ N(0, I), one latent per row.
Matrix sample_latent(std::size_t count, std::size_t latent_dim, Rng& rng);

/// Smooth surrogate for a trained GAN on mixture-shaped data.
///
/// For K >= 2 the latent is [gate (K) | shape (d)]:
///   w = softmax(gate / temperature),  G(z) = sum_k w_k (mu_k + s_k * shape)
/// so a standard-normal latent picks each component with probability 1/K and
/// moving the gate interpolates between components. For K == 1 there is no
/// gate and G(z) = mu + s * z.
class MixtureGenerator final : public Generator {
 public:
  /// means and scales are K x d; scales are per-dimension standard deviations.
  MixtureGenerator(Matrix means, Matrix scales, double temperature = 0.1);

  std::size_t latent_dim() const override;
  std::size_t output_dim() const override { return means_.cols(); }
  std::size_t components() const { return means_.rows(); }
  double temperature() const { return temperature_; }
  const Matrix& means() const { return means_; }
  const Matrix& scales() const { return scales_; }

  Matrix generate(const Matrix& z) const override;
  Matrix vjp(const Matrix& z, const Matrix& upstream) const override;

 private:
  Matrix means_;
  Matrix scales_;
  double temperature_;
};

struct MixtureFitConfig {
  std::size_t components = 8;
  double temperature = 0.1;
  std::size_t iterations = 50;
  std::uint64_t seed = 0;
};

/// Fits component means and per-dimension spreads with k-means++ and Lloyd
/// iterations. Uses samples only; labels are never consulted.
MixtureGenerator fit_mixture_generator(const Matrix& samples, const MixtureFitConfig& config);

/// Uses a trained decoder network as the generator.
class DecoderGenerator final : public Generator {
 public:
  explicit DecoderGenerator(Mlp decoder);

  std::size_t latent_dim() const override { return decoder_.input_width(); }
  std::size_t output_dim() const override { return decoder_.output_width(); }
  const Mlp& decoder() const { return decoder_; }

  Matrix generate(const Matrix& z) const override;
  Matrix vjp(const Matrix& z, const Matrix& upstream) const override;

 private:
  Mlp decoder_;
};

}  // namespace asal
