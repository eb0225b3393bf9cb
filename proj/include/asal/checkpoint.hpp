#pragma once

#include <filesystem>
#include <iosfwd>

#include "asal/mlp.hpp"
#include "asal/models.hpp"

namespace asal {

/// Plain-text model checkpoints.
///
///   asal-checkpoint 1
///   model classifier          (or: mlp, autoencoder, critic)
///   classes <m>               (classifier only)
///   network <layer-count>     (autoencoder writes two: encoder, decoder)
///   layer linear <in> <out>
///   <in lines of out hex-floats>    weights, row-major
///   <1 line of out hex-floats>      bias
///   layer leaky_relu <slope hex-float>
///   layer relu | sigmoid | tanh | softmax
///
/// Values are written with printf("%a"), so a load restores every bit.
inline constexpr int kCheckpointVersion = 1;

void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Mlp& net);
void save_checkpoint(const std::filesystem::path& path, const Classifier& model);
void save_checkpoint(const std::filesystem::path& path, const Autoencoder& model);
void save_checkpoint(const std::filesystem::path& path, const Critic& model);

Mlp load_mlp_checkpoint(const std::filesystem::path& path);
Classifier load_classifier_checkpoint(const std::filesystem::path& path);
Autoencoder load_autoencoder_checkpoint(const std::filesystem::path& path);
Critic load_critic_checkpoint(const std::filesystem::path& path);

}  // namespace asal
