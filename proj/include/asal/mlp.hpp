#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asal/matrix.hpp"
#include "asal/rng.hpp"

namespace asal {

enum class LayerKind { kLinear, kRelu, kLeakyRelu, kSigmoid, kTanh, kSoftmax };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

struct LayerSpec {
  LayerKind kind = LayerKind::kLinear;
  std::size_t in = 0;   // linear only
  std::size_t out = 0;  // linear only
  double slope = 0.01;  // leaky-relu only

  static LayerSpec linear(std::size_t in, std::size_t out) { return {LayerKind::kLinear, in, out}; }
  static LayerSpec activation(LayerKind kind, double slope = 0.01) { return {kind, 0, 0, slope}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Layer {
  LayerSpec spec;
  Matrix weights;  // in x out, linear only
  Matrix bias;     // 1 x out, linear only
};

/// Layer inputs recorded by a forward pass; backward() needs them.
struct ForwardCache {
  std::vector<Matrix> inputs;  // input of each evaluated layer
  Matrix output;
  std::size_t stop = 0;  // number of layers evaluated
  bool valid() const { return !inputs.empty(); }
};

struct Gradients {
  // Indexed by layer; empty matrices for parameter-free layers.
  std::vector<Matrix> weights;
  std::vector<Matrix> bias;
  Matrix input;
};

/// Fixed stack of dense layers with exact reverse-mode gradients.
///
/// Forward passes are const and keep no internal state, so one trained model
/// can serve concurrent inference; gradients flow through an explicit cache.
class Mlp {
 public:
  Mlp() = default;
  /// Validates width compatibility and draws Glorot-uniform weights.
  Mlp(std::vector<LayerSpec> specs, Rng& rng);
  /// Builds from explicit layers (checkpoint loading). Validates shapes.
  explicit Mlp(std::vector<Layer> layers);

  std::size_t input_width() const { return input_width_; }
  std::size_t output_width() const { return output_width_; }
  /// Width of the activations produced by layers [0, stop).
  std::size_t width_at(std::size_t stop) const;
  std::size_t layer_count() const { return layers_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<LayerSpec> specs() const;

  Matrix forward(const Matrix& x) const { return forward(x, layers_.size()); }
  /// Evaluates layers [0, stop).
  Matrix forward(const Matrix& x, std::size_t stop) const;
  ForwardCache forward_cached(const Matrix& x) const { return forward_cached(x, layers_.size()); }
  ForwardCache forward_cached(const Matrix& x, std::size_t stop) const;

  /// Gradients given d(loss)/d(output of layer stop-1).
  Gradients backward(const ForwardCache& cache, const Matrix& upstream) const;

  /// Parameter tensors in layer order (weights then bias of each linear layer).
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;
  std::size_t parameter_count() const;

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  void validate();

  std::vector<Layer> layers_;
  std::size_t input_width_ = 0;
  std::size_t output_width_ = 0;
};

/// Gradient tensors flattened in the same order as Mlp::parameters().
std::vector<std::span<const double>> flatten(const Mlp& model, const Gradients& grads);

/// in -> hidden... -> out with `activation` after each hidden linear layer.
std::vector<LayerSpec> dense_stack(std::size_t in, std::span<const std::size_t> hidden,
                                   std::size_t out, LayerKind activation);

}  // namespace asal
