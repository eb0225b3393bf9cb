#include "asal/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "asal/error.hpp"

namespace asal {

namespace {

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex(const std::string& token) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') throw ParseError("bad number in checkpoint: '" + token + "'");
  return v;
}

std::string expect_word(std::istream& in, const char* what) {
  std::string w;
  if (!(in >> w)) throw ParseError(std::string("checkpoint truncated, expected ") + what);
  return w;
}

std::size_t expect_size(std::istream& in, const char* what) {
  const std::string w = expect_word(in, what);
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(w, &pos);
    if (pos != w.size()) throw ParseError("");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ParseError(std::string("checkpoint: bad ") + what + " '" + w + "'");
  }
}

void expect_keyword(std::istream& in, const std::string& keyword) {
  const std::string w = expect_word(in, keyword.c_str());
  if (w != keyword) throw ParseError("checkpoint: expected '" + keyword + "', found '" + w + "'");
}

void write_matrix(std::ostream& out, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? " " : "") << hex(m(r, c));
    out << '\n';
  }
}

Matrix read_matrix(std::istream& in, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = parse_hex(expect_word(in, "value"));
  return m;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  return in;
}

void write_header(std::ostream& out, const char* model) {
  out << "asal-checkpoint " << kCheckpointVersion << "\nmodel " << model << '\n';
}

void read_header(std::istream& in, const std::string& model) {
  expect_keyword(in, "asal-checkpoint");
  const std::size_t version = expect_size(in, "version");
  if (version != static_cast<std::size_t>(kCheckpointVersion))
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  expect_keyword(in, "model");
  const std::string found = expect_word(in, "model name");
  if (found != model) throw ParseError("checkpoint holds a " + found + ", expected " + model);
}

}  // namespace

void write_mlp(std::ostream& out, const Mlp& net) {
  out << "network " << net.layer_count() << '\n';
  for (const auto& layer : net.layers()) {
    out << "layer " << to_string(layer.spec.kind);
    switch (layer.spec.kind) {
      case LayerKind::kLinear:
        out << ' ' << layer.spec.in << ' ' << layer.spec.out << '\n';
        write_matrix(out, layer.weights);
        write_matrix(out, layer.bias);
        break;
      case LayerKind::kLeakyRelu:
        out << ' ' << hex(layer.spec.slope) << '\n';
        break;
      default:
        out << '\n';
    }
  }
}

Mlp read_mlp(std::istream& in) {
  expect_keyword(in, "network");
  const std::size_t count = expect_size(in, "layer count");
  std::vector<Layer> layers;
  for (std::size_t i = 0; i < count; ++i) {
    expect_keyword(in, "layer");
    Layer layer;
    layer.spec.kind = layer_kind_from_string(expect_word(in, "layer kind"));
    if (layer.spec.kind == LayerKind::kLinear) {
      layer.spec.in = expect_size(in, "input width");
      layer.spec.out = expect_size(in, "output width");
      layer.weights = read_matrix(in, layer.spec.in, layer.spec.out);
      layer.bias = read_matrix(in, 1, layer.spec.out);
    } else if (layer.spec.kind == LayerKind::kLeakyRelu) {
      layer.spec.slope = parse_hex(expect_word(in, "slope"));
    }
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

void save_checkpoint(const std::filesystem::path& path, const Mlp& net) {
  auto out = open_out(path);
  write_header(out, "mlp");
  write_mlp(out, net);
}

void save_checkpoint(const std::filesystem::path& path, const Classifier& model) {
  auto out = open_out(path);
  write_header(out, "classifier");
  out << "classes " << model.classes() << '\n';
  write_mlp(out, model.network());
}

void save_checkpoint(const std::filesystem::path& path, const Autoencoder& model) {
  auto out = open_out(path);
  write_header(out, "autoencoder");
  write_mlp(out, model.encoder());
  write_mlp(out, model.decoder());
}

void save_checkpoint(const std::filesystem::path& path, const Critic& model) {
  auto out = open_out(path);
  write_header(out, "critic");
  write_mlp(out, model.network());
}

Mlp load_mlp_checkpoint(const std::filesystem::path& path) {
  auto in = open_in(path);
  read_header(in, "mlp");
  return read_mlp(in);
}

Classifier load_classifier_checkpoint(const std::filesystem::path& path) {
  auto in = open_in(path);
  read_header(in, "classifier");
  expect_keyword(in, "classes");
  const std::size_t classes = expect_size(in, "class count");
  return Classifier(read_mlp(in), classes);
}

Autoencoder load_autoencoder_checkpoint(const std::filesystem::path& path) {
  auto in = open_in(path);
  read_header(in, "autoencoder");
  Mlp encoder = read_mlp(in);
  Mlp decoder = read_mlp(in);
  return Autoencoder(std::move(encoder), std::move(decoder));
}

Critic load_critic_checkpoint(const std::filesystem::path& path) {
  auto in = open_in(path);
  read_header(in, "critic");
  return Critic(read_mlp(in));
}

}  // namespace asal
