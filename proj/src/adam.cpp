#include "asal/adam.hpp"

#include <cmath>

#include "asal/error.hpp"

namespace asal {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || state.m.size() != params.size())
    throw DimensionError("adam_step shape mismatch");
  for (double g : grads)
    if (!std::isfinite(g)) throw NumericError("non-finite gradient in adam_step");

  const auto& h = state.hyper;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * grads[i];
    state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= h.alpha * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

AdamOptimizer::AdamOptimizer(const Mlp& model, AdamHyper hyper) {
  for (auto p : model.parameters()) states_.emplace_back(p.size(), hyper);
}

void AdamOptimizer::step(Mlp& model, const Gradients& grads) {
  auto params = model.parameters();
  auto flat = flatten(model, grads);
  if (params.size() != states_.size() || flat.size() != params.size())
    throw DimensionError("optimizer does not match model");
  for (auto g : flat)
    for (double v : g)
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in optimizer step");
  for (std::size_t i = 0; i < params.size(); ++i) adam_step(params[i], flat[i], states_[i]);
}

}  // namespace asal
