#include "asal/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "asal/error.hpp"

namespace asal {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kLinear: return "linear";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kLeakyRelu: return "leaky_relu";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kTanh: return "tanh";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (auto kind : {LayerKind::kLinear, LayerKind::kRelu, LayerKind::kLeakyRelu,
                    LayerKind::kSigmoid, LayerKind::kTanh, LayerKind::kSoftmax}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

Mlp::Mlp(std::vector<LayerSpec> specs, Rng& rng) {
  layers_.reserve(specs.size());
  for (const auto& spec : specs) {
    Layer layer{spec, {}, {}};
    if (spec.kind == LayerKind::kLinear) {
      const double s = std::sqrt(6.0 / static_cast<double>(spec.in + spec.out));
      layer.weights = Matrix(spec.in, spec.out);
      for (double& w : layer.weights.data()) w = rng.uniform(-s, s);
      layer.bias = Matrix(1, spec.out);
    }
    layers_.push_back(std::move(layer));
  }
  validate();
}

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

void Mlp::validate() {
  std::size_t width = 0;
  bool seen_linear = false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    if (layer.spec.kind != LayerKind::kLinear) continue;
    if (layer.spec.in == 0 || layer.spec.out == 0)
      throw ConfigError("linear layer " + std::to_string(i) + " has zero width");
    if (seen_linear && layer.spec.in != width) {
      throw DimensionError("layer " + std::to_string(i) + " expects width " +
                        std::to_string(layer.spec.in) + " but receives " + std::to_string(width));
    }
    if (layer.weights.rows() != layer.spec.in || layer.weights.cols() != layer.spec.out ||
        layer.bias.rows() != 1 || layer.bias.cols() != layer.spec.out) {
      throw DimensionError("layer " + std::to_string(i) + " parameter shape mismatch");
    }
    if (!seen_linear) input_width_ = layer.spec.in;
    seen_linear = true;
    width = layer.spec.out;
  }
  if (!seen_linear) throw ConfigError("network needs at least one linear layer");
  output_width_ = width;
}

std::size_t Mlp::width_at(std::size_t stop) const {
  std::size_t width = input_width_;
  for (std::size_t i = 0; i < stop && i < layers_.size(); ++i)
    if (layers_[i].spec.kind == LayerKind::kLinear) width = layers_[i].spec.out;
  return width;
}

std::vector<LayerSpec> Mlp::specs() const {
  std::vector<LayerSpec> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_) out.push_back(l.spec);
  return out;
}

namespace {

Matrix apply(const Layer& layer, const Matrix& x) {
  switch (layer.spec.kind) {
    case LayerKind::kLinear:
      return linear_forward(x, layer.weights, layer.bias);
    case LayerKind::kSoftmax:
      return softmax(x);
    default:
      break;
  }
  Matrix out = x;
  const double slope = layer.spec.slope;
  for (double& v : out.data()) {
    switch (layer.spec.kind) {
      case LayerKind::kRelu: v = v > 0.0 ? v : 0.0; break;
      case LayerKind::kLeakyRelu: v = v > 0.0 ? v : slope * v; break;
      case LayerKind::kSigmoid: v = 1.0 / (1.0 + std::exp(-v)); break;
      case LayerKind::kTanh: v = std::tanh(v); break;
      default: break;
    }
  }
  return out;
}

}  // namespace

Matrix Mlp::forward(const Matrix& x, std::size_t stop) const {
  if (x.cols() != input_width_)
    throw DimensionError("network input width " + std::to_string(input_width_) + ", got " +
                         std::to_string(x.cols()));
  stop = std::min(stop, layers_.size());
  Matrix h = x;
  for (std::size_t i = 0; i < stop; ++i) h = apply(layers_[i], h);
  return h;
}

ForwardCache Mlp::forward_cached(const Matrix& x, std::size_t stop) const {
  if (x.cols() != input_width_)
    throw DimensionError("network input width " + std::to_string(input_width_) + ", got " +
                         std::to_string(x.cols()));
  ForwardCache cache;
  cache.stop = std::min(stop, layers_.size());
  cache.inputs.reserve(cache.stop + 1);
  Matrix h = x;
  for (std::size_t i = 0; i < cache.stop; ++i) {
    Matrix next = apply(layers_[i], h);
    cache.inputs.push_back(std::move(h));
    h = std::move(next);
  }
  if (cache.inputs.empty()) cache.inputs.push_back(h);  // stop == 0: identity
  cache.output = std::move(h);
  return cache;
}

Gradients Mlp::backward(const ForwardCache& cache, const Matrix& upstream) const {
  if (!cache.valid()) throw StateError("backward called without a cached forward pass");
  if (upstream.rows() != cache.output.rows() || upstream.cols() != cache.output.cols())
    throw DimensionError("upstream gradient does not match cached output");

  Gradients grads;
  grads.weights.resize(layers_.size());
  grads.bias.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].spec.kind != LayerKind::kLinear) continue;
    grads.weights[i] = Matrix(layers_[i].spec.in, layers_[i].spec.out);
    grads.bias[i] = Matrix(1, layers_[i].spec.out);
  }
  Matrix g = upstream;
  for (std::size_t i = cache.stop; i-- > 0;) {
    const Layer& layer = layers_[i];
    const Matrix& in = cache.inputs[i];
    switch (layer.spec.kind) {
      case LayerKind::kLinear: {
        grads.weights[i] = matmul_tn(in, g);
        Matrix db(1, g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) db(0, c) += g(r, c);
        grads.bias[i] = std::move(db);
        g = matmul_nt(g, layer.weights);
        break;
      }
      case LayerKind::kRelu:
        for (std::size_t k = 0; k < g.size(); ++k)
          if (!(in.data()[k] > 0.0)) g.data()[k] = 0.0;
        break;
      case LayerKind::kLeakyRelu:
        for (std::size_t k = 0; k < g.size(); ++k)
          if (!(in.data()[k] > 0.0)) g.data()[k] *= layer.spec.slope;
        break;
      case LayerKind::kSigmoid:
        for (std::size_t k = 0; k < g.size(); ++k) {
          const double s = 1.0 / (1.0 + std::exp(-in.data()[k]));
          g.data()[k] *= s * (1.0 - s);
        }
        break;
      case LayerKind::kTanh:
        for (std::size_t k = 0; k < g.size(); ++k) {
          const double t = std::tanh(in.data()[k]);
          g.data()[k] *= 1.0 - t * t;
        }
        break;
      case LayerKind::kSoftmax: {
        const Matrix p = softmax(in);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < g.cols(); ++c) dot += g(r, c) * p(r, c);
          for (std::size_t c = 0; c < g.cols(); ++c) g(r, c) = p(r, c) * (g(r, c) - dot);
        }
        break;
      }
    }
  }
  grads.input = std::move(g);
  return grads;
}

std::vector<std::span<double>> Mlp::parameters() {
  std::vector<std::span<double>> out;
  for (auto& layer : layers_) {
    if (layer.spec.kind != LayerKind::kLinear) continue;
    out.emplace_back(layer.weights.data());
    out.emplace_back(layer.bias.data());
  }
  return out;
}

std::vector<std::span<const double>> Mlp::parameters() const {
  std::vector<std::span<const double>> out;
  for (const auto& layer : layers_) {
    if (layer.spec.kind != LayerKind::kLinear) continue;
    out.emplace_back(layer.weights.data());
    out.emplace_back(layer.bias.data());
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (auto p : parameters()) n += p.size();
  return n;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const auto& x = a.layers_[i];
    const auto& y = b.layers_[i];
    if (!(x.spec == y.spec) || !(x.weights == y.weights) || !(x.bias == y.bias)) return false;
  }
  return true;
}

std::vector<std::span<const double>> flatten(const Mlp& model, const Gradients& grads) {
  std::vector<std::span<const double>> out;
  for (std::size_t i = 0; i < grads.weights.size(); ++i) {
    if (model.layers()[i].spec.kind != LayerKind::kLinear) continue;
    out.emplace_back(grads.weights[i].data());
    out.emplace_back(grads.bias[i].data());
  }
  return out;
}

std::vector<LayerSpec> dense_stack(std::size_t in, std::span<const std::size_t> hidden,
                                   std::size_t out, LayerKind activation) {
  std::vector<LayerSpec> specs;
  std::size_t width = in;
  for (std::size_t h : hidden) {
    specs.push_back(LayerSpec::linear(width, h));
    specs.push_back(LayerSpec::activation(activation));
    width = h;
  }
  specs.push_back(LayerSpec::linear(width, out));
  return specs;
}

}  // namespace asal
