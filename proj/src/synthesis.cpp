#include "asal/synthesis.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "asal/error.hpp"

namespace asal {

namespace {

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void check_compatible(const Generator& generator, const Classifier& classifier) {
  if (generator.output_dim() != classifier.input_width())
    throw DimensionError("generator output width " + std::to_string(generator.output_dim()) +
                         " != classifier input width " + std::to_string(classifier.input_width()));
}

}  // namespace

double SyntheticBatch::mean_initial_entropy() const { return mean(initial_entropy); }
double SyntheticBatch::mean_final_entropy() const { return mean(final_entropy); }

std::vector<double> latent_entropy(const Generator& generator, const Classifier& classifier,
                                   const Matrix& z) {
  check_compatible(generator, classifier);
  const Matrix h = entropy(classifier.predict_proba(generator.generate(z)));
  return h.data();
}

Matrix entropy_latent_gradient(const Generator& generator, const Classifier& classifier,
                               const Matrix& z) {
  check_compatible(generator, classifier);
  const Matrix x = generator.generate(z);
  const auto& net = classifier.network();
  auto cache = net.forward_cached(x, classifier.logits_stop());
  const Matrix p = softmax(cache.output);
  // dH/dlogit_j = -p_j (log p_j + H)
  Matrix grad(p.rows(), p.cols());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const double h = row_entropy(p.row(r));
    for (std::size_t c = 0; c < p.cols(); ++c) {
      const double pc = p(r, c);
      grad(r, c) = pc > 0.0 ? -pc * (std::log(pc) + h) : 0.0;
    }
  }
  const Matrix dx = net.backward(cache, grad).input;
  return generator.vjp(z, dx);
}

SyntheticBatch synthesize_from(const Generator& generator, const Classifier& classifier,
                               const SynthesisConfig& config, Matrix z) {
  if (config.steps == 0) throw ConfigError("synthesis needs at least one step");
  if (z.rows() == 0) throw ConfigError("synthesis batch must be >= 1");
  check_compatible(generator, classifier);

  SyntheticBatch batch;
  batch.initial_entropy = latent_entropy(generator, classifier, z);
  AdamState state(z.size(), config.optimizer);
  for (std::size_t step = 0; step < config.steps; ++step) {
    Matrix grad = entropy_latent_gradient(generator, classifier, z);
    for (double& g : grad.data()) {
      if (!std::isfinite(g))
        throw NumericError("non-finite entropy gradient at synthesis step " + std::to_string(step));
      g = -g;  // ascent on H == descent on -H
    }
    adam_step(z.data(), grad.data(), state);
  }
  batch.samples = generator.generate(z);
  batch.final_entropy = entropy(classifier.predict_proba(batch.samples)).data();
  for (double h : batch.final_entropy)
    if (!std::isfinite(h)) throw NumericError("non-finite entropy after synthesis");
  batch.latents = std::move(z);
  return batch;
}

SyntheticBatch synthesize_uncertain(const Generator& generator, const Classifier& classifier,
                                    const SynthesisConfig& config, Rng& rng) {
  if (config.batch == 0) throw ConfigError("synthesis batch must be >= 1");
  return synthesize_from(generator, classifier, config,
                         sample_latent(config.batch, generator.latent_dim(), rng));
}

}  // namespace asal
