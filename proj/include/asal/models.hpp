#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "asal/generator.hpp"
#include "asal/matrix.hpp"
#include "asal/mlp.hpp"

namespace asal {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct TrainingReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_loss;  // mean minibatch loss per epoch
};

struct ClassifierConfig {
  std::vector<std::size_t> hidden;  // empty: linear softmax model
  LayerKind activation = LayerKind::kRelu;
  TrainConfig train;
};

/// Softmax classifier h(x) = P(c | x).
class Classifier {
 public:
  Classifier(Mlp network, std::size_t classes);

  const Mlp& network() const { return net_; }
  std::size_t classes() const { return classes_; }
  std::size_t input_width() const { return net_.input_width(); }

  Matrix predict_proba(const Matrix& x) const { return net_.forward(x); }
  Matrix logits(const Matrix& x) const { return net_.forward(x, logits_stop()); }
  /// Activations feeding the final linear layer; the input itself for linear models.
  Matrix penultimate(const Matrix& x) const { return net_.forward(x, penultimate_stop()); }
  std::size_t penultimate_width() const { return net_.width_at(penultimate_stop()); }
  /// Argmax class per row, ties to the lowest index.
  std::vector<int> predict(const Matrix& x) const;

  /// Number of layers producing the logits (all but the softmax).
  std::size_t logits_stop() const { return net_.layer_count() - 1; }
  std::size_t penultimate_stop() const { return net_.layer_count() - 2; }

  /// Single linear layer followed by softmax.
  bool is_linear() const { return net_.layer_count() == 2; }

  friend bool operator==(const Classifier&, const Classifier&) = default;

 private:
  Mlp net_;
  std::size_t classes_;
};

/// Mean cross-entropy with one-hot targets.
double cross_entropy(const Classifier& model, const Matrix& x, std::span<const int> labels);

/// Trains from fresh parameters on (x, labels). Deterministic per config seed.
Classifier train_classifier(const Matrix& x, std::span<const int> labels, std::size_t classes,
                            const ClassifierConfig& config, TrainingReport* report = nullptr);

struct AutoencoderConfig {
  std::size_t feature_width = 8;
  std::vector<std::size_t> hidden;  // encoder widths; the decoder mirrors them
  LayerKind activation = LayerKind::kTanh;
  TrainConfig train;
};

class Autoencoder {
 public:
  Autoencoder(Mlp encoder, Mlp decoder);

  const Mlp& encoder() const { return encoder_; }
  const Mlp& decoder() const { return decoder_; }
  std::size_t feature_width() const { return encoder_.output_width(); }

  Matrix encode(const Matrix& x) const { return encoder_.forward(x); }
  Matrix decode(const Matrix& f) const { return decoder_.forward(f); }
  Matrix reconstruct(const Matrix& x) const { return decode(encode(x)); }
  /// Mean squared error per entry.
  double reconstruction_mse(const Matrix& x) const;

 private:
  Mlp encoder_;
  Mlp decoder_;
};

/// Minimises the squared reconstruction error of decode(encode(x)).
Autoencoder train_autoencoder(const Matrix& samples, const AutoencoderConfig& config,
                              TrainingReport* report = nullptr);

struct CriticConfig {
  std::vector<std::size_t> hidden = {32, 16};  // last entry is the feature width
  LayerKind activation = LayerKind::kLeakyRelu;
  TrainConfig train;
};

/// Logistic real-vs-generated discriminator; its penultimate layer is a feature map.
class Critic {
 public:
  explicit Critic(Mlp network);

  const Mlp& network() const { return net_; }
  /// P(real | x).
  Matrix score(const Matrix& x) const { return net_.forward(x); }
  Matrix features(const Matrix& x) const { return net_.forward(x, feature_stop()); }
  std::size_t feature_width() const { return net_.width_at(feature_stop()); }
  std::size_t feature_stop() const { return net_.layer_count() - 2; }
  /// Fraction classified correctly, real as >= 0.5 and generated as < 0.5.
  double accuracy(const Matrix& real, const Matrix& generated) const;

 private:
  Mlp net_;
};

/// Binary cross-entropy training on (real = 1, G(z) = 0) with fresh latents each batch.
Critic train_critic(const Matrix& real, const Generator& generator, const CriticConfig& config,
                    TrainingReport* report = nullptr);

}  // namespace asal
