#include "asal/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "asal/adam.hpp"
#include "asal/error.hpp"

namespace asal {

namespace {

// Visits shuffled minibatches for one epoch.
template <typename Fn>
void for_each_batch(std::vector<std::size_t>& order, std::size_t batch_size, Rng& rng, Fn&& fn) {
  rng.shuffle(order);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, order.size() - start);
    fn(std::span<const std::size_t>(order.data() + start, count));
  }
}

void check_train_config(const TrainConfig& c) {
  if (c.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
}

double stable_log_sigmoid(double s) { return s >= 0 ? -std::log1p(std::exp(-s)) : s - std::log1p(std::exp(s)); }

}  // namespace

Classifier::Classifier(Mlp network, std::size_t classes)
    : net_(std::move(network)), classes_(classes) {
  if (classes_ < 2) throw ConfigError("classifier needs at least two classes");
  const auto& layers = net_.layers();
  if (layers.size() < 2 || layers.back().spec.kind != LayerKind::kSoftmax ||
      layers[layers.size() - 2].spec.kind != LayerKind::kLinear)
    throw ConfigError("classifier must end with linear + softmax");
  if (net_.output_width() != classes_) throw ConfigError("classifier output width != class count");
}

std::vector<int> Classifier::predict(const Matrix& x) const {
  const Matrix p = predict_proba(x);
  std::vector<int> out(p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto r = p.row(i);
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

double cross_entropy(const Classifier& model, const Matrix& x, std::span<const int> labels) {
  if (x.rows() == 0) return 0.0;
  const Matrix logits = model.logits(x);
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double v : r) sum += std::exp(v - mx);
    loss += std::log(sum) + mx - r[static_cast<std::size_t>(labels[i])];
  }
  return loss / static_cast<double>(logits.rows());
}

Classifier train_classifier(const Matrix& x, std::span<const int> labels, std::size_t classes,
                            const ClassifierConfig& config, TrainingReport* report) {
  if (x.rows() == 0) throw ArgumentError("cannot train a classifier on an empty set");
  if (labels.size() != x.rows()) throw DimensionError("label count != sample count");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw ArgumentError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
  check_train_config(config.train);

  Rng rng(config.train.seed);
  auto specs = dense_stack(x.cols(), config.hidden, classes, config.activation);
  specs.push_back(LayerSpec::activation(LayerKind::kSoftmax));
  Classifier model(Mlp(std::move(specs), rng), classes);

  TrainingReport local;
  local.initial_loss = cross_entropy(model, x, labels);

  // Train the logits directly; d(CE)/d(logits) = p - onehot.
  Mlp net = model.network();
  const std::size_t stop = model.logits_stop();
  AdamOptimizer optimizer(net, AdamHyper{config.train.learning_rate});
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.train.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for_each_batch(order, config.train.batch_size, rng, [&](std::span<const std::size_t> batch) {
      const Matrix xb = x.gather_rows(batch);
      auto cache = net.forward_cached(xb, stop);
      Matrix grad = softmax(cache.output);
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto y = static_cast<std::size_t>(labels[batch[i]]);
        epoch_loss -= std::log(std::max(grad(i, y), 1e-300));
        grad(i, y) -= 1.0;
        for (double& g : grad.row(i)) g *= inv;
      }
      optimizer.step(net, net.backward(cache, grad));
    });
    local.epoch_loss.push_back(epoch_loss / static_cast<double>(x.rows()));
  }
  model = Classifier(std::move(net), classes);
  local.final_loss = cross_entropy(model, x, labels);
  if (report) *report = std::move(local);
  return model;
}

Autoencoder::Autoencoder(Mlp encoder, Mlp decoder)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)) {
  if (encoder_.output_width() != decoder_.input_width() ||
      decoder_.output_width() != encoder_.input_width())
    throw ConfigError("encoder and decoder widths do not compose");
}

double Autoencoder::reconstruction_mse(const Matrix& x) const {
  if (x.rows() == 0) return 0.0;
  const Matrix r = reconstruct(x);
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = r.data()[k] - x.data()[k];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

Autoencoder train_autoencoder(const Matrix& samples, const AutoencoderConfig& config,
                              TrainingReport* report) {
  if (samples.rows() == 0) throw ArgumentError("cannot train an autoencoder on an empty pool");
  const std::size_t d = samples.cols();
  if (config.feature_width == 0 || config.feature_width >= d)
    throw ConfigError("autoencoder feature width must be in [1, " + std::to_string(d) + ")");
  check_train_config(config.train);

  Rng rng(config.train.seed);
  std::vector<std::size_t> mirrored(config.hidden.rbegin(), config.hidden.rend());
  Mlp encoder(dense_stack(d, config.hidden, config.feature_width, config.activation), rng);
  Mlp decoder(dense_stack(config.feature_width, mirrored, d, config.activation), rng);

  TrainingReport local;
  local.initial_loss = Autoencoder(encoder, decoder).reconstruction_mse(samples);

  AdamOptimizer enc_opt(encoder, AdamHyper{config.train.learning_rate});
  AdamOptimizer dec_opt(decoder, AdamHyper{config.train.learning_rate});
  std::vector<std::size_t> order(samples.rows());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.train.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for_each_batch(order, config.train.batch_size, rng, [&](std::span<const std::size_t> batch) {
      const Matrix xb = samples.gather_rows(batch);
      auto enc_cache = encoder.forward_cached(xb);
      auto dec_cache = decoder.forward_cached(enc_cache.output);
      Matrix grad = dec_cache.output;
      const double scale = 2.0 / static_cast<double>(xb.size());
      for (std::size_t k = 0; k < grad.size(); ++k) {
        const double diff = grad.data()[k] - xb.data()[k];
        epoch_loss += diff * diff;
        grad.data()[k] = scale * diff;
      }
      auto dec_grads = decoder.backward(dec_cache, grad);
      auto enc_grads = encoder.backward(enc_cache, dec_grads.input);
      dec_opt.step(decoder, dec_grads);
      enc_opt.step(encoder, enc_grads);
    });
    local.epoch_loss.push_back(epoch_loss / static_cast<double>(samples.size()));
  }
  Autoencoder model(std::move(encoder), std::move(decoder));
  local.final_loss = model.reconstruction_mse(samples);
  if (report) *report = std::move(local);
  return model;
}

Critic::Critic(Mlp network) : net_(std::move(network)) {
  const auto& layers = net_.layers();
  if (layers.size() < 2 || layers.back().spec.kind != LayerKind::kSigmoid ||
      net_.output_width() != 1)
    throw ConfigError("critic must end with a single sigmoid unit");
}

double Critic::accuracy(const Matrix& real, const Matrix& generated) const {
  std::size_t correct = 0;
  const Matrix sr = score(real);
  const Matrix sg = score(generated);
  for (double v : sr.data()) correct += v >= 0.5;
  for (double v : sg.data()) correct += v < 0.5;
  const std::size_t total = sr.rows() + sg.rows();
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

Critic train_critic(const Matrix& real, const Generator& generator, const CriticConfig& config,
                    TrainingReport* report) {
  if (real.rows() == 0) throw ArgumentError("cannot train a critic on an empty pool");
  if (generator.output_dim() != real.cols()) throw DimensionError("generator/pool width mismatch");
  if (config.hidden.empty()) throw ConfigError("critic needs at least one hidden layer");
  check_train_config(config.train);

  Rng rng(config.train.seed);
  auto specs = dense_stack(real.cols(), config.hidden, 1, config.activation);
  specs.push_back(LayerSpec::activation(LayerKind::kSigmoid));
  Mlp net(std::move(specs), rng);
  const std::size_t logit_stop = net.layer_count() - 1;
  Rng latent_rng = rng.fork(1);

  auto bce = [&](const Mlp& m, const Matrix& xr, const Matrix& xg) {
    const Matrix lr = m.forward(xr, logit_stop);
    const Matrix lg = m.forward(xg, logit_stop);
    double loss = 0.0;
    for (double s : lr.data()) loss -= stable_log_sigmoid(s);
    for (double s : lg.data()) loss -= stable_log_sigmoid(-s);
    return loss / static_cast<double>(lr.rows() + lg.rows());
  };

  TrainingReport local;
  Rng eval_rng(mix_seed(config.train.seed, 7));
  const std::size_t eval_count = std::min<std::size_t>(real.rows(), 512);
  const Matrix eval_real = real.slice_rows(0, eval_count);
  const Matrix eval_fake = generator.generate(sample_latent(eval_count, generator.latent_dim(), eval_rng));
  local.initial_loss = bce(net, eval_real, eval_fake);

  AdamOptimizer optimizer(net, AdamHyper{config.train.learning_rate});
  std::vector<std::size_t> order(real.rows());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.train.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for_each_batch(order, config.train.batch_size, rng, [&](std::span<const std::size_t> batch) {
      Matrix xb = real.gather_rows(batch);
      xb.append_rows(generator.generate(sample_latent(batch.size(), generator.latent_dim(), latent_rng)));
      auto cache = net.forward_cached(xb, logit_stop);
      Matrix grad(xb.rows(), 1);
      const double inv = 1.0 / static_cast<double>(xb.rows());
      for (std::size_t i = 0; i < xb.rows(); ++i) {
        const double s = cache.output(i, 0);
        const double target = i < batch.size() ? 1.0 : 0.0;
        epoch_loss -= target > 0.5 ? stable_log_sigmoid(s) : stable_log_sigmoid(-s);
        grad(i, 0) = (1.0 / (1.0 + std::exp(-s)) - target) * inv;
      }
      optimizer.step(net, net.backward(cache, grad));
    });
    local.epoch_loss.push_back(epoch_loss / static_cast<double>(2 * real.rows()));
  }
  local.final_loss = bce(net, eval_real, eval_fake);
  if (report) *report = std::move(local);
  return Critic(std::move(net));
}

}  // namespace asal
