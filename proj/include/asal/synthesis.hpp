#pragma once

#include <cstddef>
#include <vector>

#include "asal/adam.hpp"
#include "asal/generator.hpp"
#include "asal/matrix.hpp"
#include "asal/models.hpp"
#include "asal/rng.hpp"

namespace asal {

struct SynthesisConfig {
  std::size_t steps = 100;
  std::size_t batch = 10;  // latents optimised jointly
  AdamHyper optimizer{0.05, 0.9, 0.999, 1e-8};
};

struct SyntheticBatch {
  Matrix latents;  // final z
  Matrix samples;  // G(z) at the final z
  std::vector<double> initial_entropy;
  std::vector<double> final_entropy;

  double mean_initial_entropy() const;
  double mean_final_entropy() const;
};

/// dH(h(G(z)))/dz per latent row; rows do not interact.
Matrix entropy_latent_gradient(const Generator& generator, const Classifier& classifier,
                               const Matrix& z);

/// Classifier entropy of G(z) per latent row.
std::vector<double> latent_entropy(const Generator& generator, const Classifier& classifier,
                                   const Matrix& z);

/// Draws z ~ N(0, I) and runs Adam ascent on the classifier entropy of G(z).
/// The ascent is implemented as descent on -H. Latents are never re-projected
/// onto the prior and latents whose entropy drops are kept.
///
/// Takes no pool argument: cost depends only on the batch, the generator and
/// the classifier.
SyntheticBatch synthesize_uncertain(const Generator& generator, const Classifier& classifier,
                                    const SynthesisConfig& config, Rng& rng);

/// Same ascent from caller-provided starting latents.
SyntheticBatch synthesize_from(const Generator& generator, const Classifier& classifier,
                               const SynthesisConfig& config, Matrix z);

}  // namespace asal
