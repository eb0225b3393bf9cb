#include "asal/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "asal/binary_io.hpp"
#include "asal/error.hpp"
#include "asal/rng.hpp"

namespace asal {

Pool::Pool(Matrix samples, std::vector<int> labels, std::size_t classes,
           std::optional<ImageShape> image)
    : samples_(std::move(samples)), labels_(std::move(labels)), classes_(classes), image_(image) {
  if (labels_.size() != samples_.rows()) throw DimensionError("pool label count != sample count");
  for (int y : labels_)
    if (y < 0 || static_cast<std::size_t>(y) >= classes_)
      throw ArgumentError("pool label " + std::to_string(y) + " outside [0, " +
                          std::to_string(classes_) + ")");
  if (image_ && image_->rows * image_->cols != samples_.cols())
    throw DimensionError("image shape does not match sample width");
}

namespace {

Matrix auto_means(const GaussianMixtureSpec& spec, Rng& rng) {
  Matrix means(spec.components, spec.dim);
  for (std::size_t k = 0; k < spec.components; ++k) {
    auto row = means.row(k);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& v : row) {
        v = rng.normal();
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& v : row) v = spec.separation * v / norm;
  }
  return means;
}

std::size_t nearest_mean(const Matrix& means, std::span<const double> x) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < means.rows(); ++k) {
    const double d = squared_distance(means.row(k), x);
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  return best;
}

}  // namespace

Dataset make_gaussian_mixture(const GaussianMixtureSpec& spec) {
  if (spec.components < 2) throw ConfigError("gaussian mixture needs K >= 2 components");
  if (spec.classes < 2) throw ConfigError("gaussian mixture needs at least two classes");
  if (spec.dim == 0) throw ConfigError("gaussian mixture needs dim >= 1");
  if (!spec.means.empty() && (spec.means.rows() != spec.components || spec.means.cols() != spec.dim))
    throw ConfigError("means must be components x dim");

  std::vector<double> spreads = spec.spreads.empty()
                                    ? std::vector<double>(spec.components, spec.spread)
                                    : spec.spreads;
  if (spreads.size() != spec.components) throw ConfigError("spreads must have one entry per component");
  for (double s : spreads)
    if (!std::isfinite(s) || s < 0.0) throw ConfigError("degenerate covariance: spread must be finite and >= 0");

  std::vector<int> class_map = spec.class_map;
  if (class_map.empty())
    for (std::size_t k = 0; k < spec.components; ++k)
      class_map.push_back(static_cast<int>(k % spec.classes));
  if (class_map.size() != spec.components) throw ConfigError("class_map must have one entry per component");
  for (int c : class_map)
    if (c < 0 || static_cast<std::size_t>(c) >= spec.classes) throw ConfigError("class_map entry out of range");

  std::vector<double> weights = spec.weights.empty() ? std::vector<double>(spec.components, 1.0) : spec.weights;
  if (weights.size() != spec.components) throw ConfigError("weights must have one entry per component");
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("component weights must be >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("component weights sum to zero");

  Rng rng(spec.seed);
  Rng mean_rng = rng.fork(1);
  Rng sample_rng = rng.fork(2);
  Matrix means = spec.means.empty() ? auto_means(spec, mean_rng) : spec.means;

  auto draw = [&](std::size_t count) {
    Matrix x(count, spec.dim);
    std::vector<int> y(count);
    for (std::size_t i = 0; i < count; ++i) {
      double u = sample_rng.uniform() * total;
      std::size_t k = 0;
      while (k + 1 < spec.components && u >= weights[k]) u -= weights[k++];
      auto row = x.row(i);
      for (std::size_t j = 0; j < spec.dim; ++j) row[j] = means(k, j) + spreads[k] * sample_rng.normal();
      y[i] = class_map[k];
    }
    return Pool(std::move(x), std::move(y), spec.classes);
  };

  Dataset ds;
  ds.pool = draw(spec.pool_size);
  ds.test = draw(spec.test_size);
  ds.labeler = [means, class_map](std::span<const double> x) -> std::optional<int> {
    if (x.size() != means.cols()) return std::nullopt;
    return class_map[nearest_mean(means, x)];
  };
  return ds;
}

Dataset make_two_moons(const TwoMoonsSpec& spec) {
  if (!(spec.noise >= 0.0)) throw ConfigError("two-moons noise must be >= 0");
  Rng rng(spec.seed);
  auto draw = [&](std::size_t count) {
    Matrix x(count, 2);
    std::vector<int> y(count);
    for (std::size_t i = 0; i < count; ++i) {
      const int cls = static_cast<int>(rng.index(2));
      const double t = rng.uniform() * std::numbers::pi;
      if (cls == 0) {
        x(i, 0) = std::cos(t);
        x(i, 1) = std::sin(t);
      } else {
        x(i, 0) = 1.0 - std::cos(t);
        x(i, 1) = 0.5 - std::sin(t);
      }
      x(i, 0) += spec.noise * rng.normal();
      x(i, 1) += spec.noise * rng.normal();
      y[i] = cls;
    }
    return Pool(std::move(x), std::move(y), 2);
  };
  Dataset ds;
  ds.pool = draw(spec.pool_size);
  ds.test = draw(spec.test_size);
  return ds;
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw ParseError("truncated IDX header in " + what);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

}  // namespace

Pool load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  std::ifstream img(images, std::ios::binary);
  if (!img) throw IoError("cannot open " + images.string());
  std::ifstream lab(labels, std::ios::binary);
  if (!lab) throw IoError("cannot open " + labels.string());

  const auto img_magic = read_be32(img, images.string());
  if (img_magic != kIdxImages) throw ParseError("bad IDX image magic in " + images.string());
  const std::size_t count = read_be32(img, images.string());
  const std::size_t rows = read_be32(img, images.string());
  const std::size_t cols = read_be32(img, images.string());

  const auto lab_magic = read_be32(lab, labels.string());
  if (lab_magic != kIdxLabels) throw ParseError("bad IDX label magic in " + labels.string());
  const std::size_t label_count = read_be32(lab, labels.string());
  if (label_count != count)
    throw ParseError("IDX label count " + std::to_string(label_count) + " != image count " +
                     std::to_string(count));

  std::vector<unsigned char> pixels(count * rows * cols);
  img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!img) throw ParseError("truncated IDX image data in " + images.string());
  std::vector<unsigned char> raw_labels(count);
  lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(count));
  if (!lab) throw ParseError("truncated IDX label data in " + labels.string());

  Matrix x(count, rows * cols);
  for (std::size_t i = 0; i < pixels.size(); ++i) x.data()[i] = pixels[i] / 255.0;
  std::vector<int> y(raw_labels.begin(), raw_labels.end());
  const int max_label = y.empty() ? 1 : *std::max_element(y.begin(), y.end());
  return Pool(std::move(x), std::move(y), std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1),
              ImageShape{rows, cols});
}

void save_idx(const Pool& pool, const std::filesystem::path& images, const std::filesystem::path& labels) {
  const ImageShape shape = pool.image_shape().value_or(ImageShape{1, pool.width()});
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw IoError("cannot write IDX files");
  write_be32(img, kIdxImages);
  write_be32(img, static_cast<std::uint32_t>(pool.size()));
  write_be32(img, static_cast<std::uint32_t>(shape.rows));
  write_be32(img, static_cast<std::uint32_t>(shape.cols));
  for (double v : pool.samples().data()) {
    const double scaled = std::clamp(std::round(v * 255.0), 0.0, 255.0);
    img.put(static_cast<char>(static_cast<unsigned char>(scaled)));
  }
  write_be32(lab, kIdxLabels);
  write_be32(lab, static_cast<std::uint32_t>(pool.size()));
  for (int y : pool.hidden_labels()) {
    if (y < 0 || y > 255) throw ArgumentError("IDX labels must fit in a byte");
    lab.put(static_cast<char>(static_cast<unsigned char>(y)));
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, delim)) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == delim) cells.emplace_back();
  return cells;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

}  // namespace

Pool load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(split_line(line, options.delimiter));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw ArgumentError("CSV file " + path.string() + " is empty");

  bool header = false;
  if (options.has_header) {
    header = *options.has_header;
  } else {
    for (const auto& cell : rows.front())
      if (!parse_number(cell)) header = true;
  }

  const std::size_t width = rows.front().size();
  std::size_t label_col = width;
  if (header) {
    for (std::size_t c = 0; c < width; ++c)
      if (rows.front()[c] == options.label_column) label_col = c;
  } else if (auto idx = parse_number(options.label_column); idx && *idx >= 0 && *idx == std::floor(*idx)) {
    label_col = static_cast<std::size_t>(*idx);
  }
  if (label_col >= width) throw ConfigError("CSV label column '" + options.label_column + "' not found");

  const std::size_t first = header ? 1 : 0;
  if (rows.size() <= first) throw ArgumentError("CSV file " + path.string() + " has no data rows");
  Matrix x(rows.size() - first, width - 1);
  std::vector<long long> raw_labels;
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != width)
      throw ParseError("CSV row " + std::to_string(line_numbers[r]) + " has " +
                       std::to_string(cells.size()) + " cells, expected " + std::to_string(width));
    std::size_t out_col = 0;
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = parse_number(cells[c]);
      if (!v)
        throw ParseError("non-numeric CSV cell at row " + std::to_string(line_numbers[r]) +
                         ", column " + std::to_string(c + 1) + ": '" + cells[c] + "'");
      if (c == label_col) {
        if (*v != std::floor(*v))
          throw ParseError("non-integer label at row " + std::to_string(line_numbers[r]));
        raw_labels.push_back(static_cast<long long>(*v));
      } else {
        x(r - first, out_col++) = *v;
      }
    }
  }
  std::map<long long, int> remap;
  for (auto v : raw_labels) remap.emplace(v, 0);
  int next = 0;
  for (auto& [value, id] : remap) id = next++;
  std::vector<int> y;
  for (auto v : raw_labels) y.push_back(remap[v]);
  return Pool(std::move(x), std::move(y), std::max<std::size_t>(2, remap.size()));
}

void save_pool(const std::filesystem::path& path, const Pool& pool) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  binio::write_magic(out, "ASALPL", 1);
  binio::write_u64(out, pool.size());
  binio::write_u64(out, pool.width());
  binio::write_u64(out, pool.classes());
  const ImageShape shape = pool.image_shape().value_or(ImageShape{});
  binio::write_u64(out, shape.rows);
  binio::write_u64(out, shape.cols);
  binio::write_f64s(out, pool.samples().data());
  for (int y : pool.hidden_labels()) binio::write_u64(out, static_cast<std::uint64_t>(y));
  if (!out) throw IoError("failed writing " + path.string());
}

Pool load_pool(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  binio::read_magic(in, "ASALPL", 1);
  const auto rows = binio::read_u64(in);
  const auto cols = binio::read_u64(in);
  const auto classes = binio::read_u64(in);
  const auto img_rows = binio::read_u64(in);
  const auto img_cols = binio::read_u64(in);
  Matrix x(rows, cols);
  binio::read_f64s(in, x.data());
  std::vector<int> y(rows);
  for (auto& v : y) v = static_cast<int>(binio::read_u64(in));
  std::optional<ImageShape> shape;
  if (img_rows || img_cols) shape = ImageShape{img_rows, img_cols};
  return Pool(std::move(x), std::move(y), classes, shape);
}

Pool replicate_with_jitter(const Pool& base, std::size_t size, double jitter, std::uint64_t seed) {
  if (base.size() == 0) throw ArgumentError("cannot replicate an empty pool");
  Rng rng(seed);
  Matrix x(size, base.width());
  std::vector<int> y(size);
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t src = i % base.size();
    auto in = base.samples().row(src);
    auto out = x.row(i);
    const bool copy = i >= base.size();
    for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] + (copy ? jitter * rng.normal() : 0.0);
    y[i] = base.hidden_labels()[src];
  }
  return Pool(std::move(x), std::move(y), base.classes(), base.image_shape());
}

}  // namespace asal
