#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "asal/mlp.hpp"

namespace asal {

struct AdamHyper {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment buffers for one parameter tensor.
struct AdamState {
  AdamHyper hyper;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  AdamState() = default;
  AdamState(std::size_t size, AdamHyper h) : hyper(h), m(size, 0.0), v(size, 0.0) {}
};

/// One bias-corrected Adam update in place. Throws NumericError on a
/// non-finite gradient before touching the parameters.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

/// Adam over every parameter tensor of a network.
class AdamOptimizer {
 public:
  AdamOptimizer(const Mlp& model, AdamHyper hyper);
  void step(Mlp& model, const Gradients& grads);

 private:
  std::vector<AdamState> states_;
};

}  // namespace asal
