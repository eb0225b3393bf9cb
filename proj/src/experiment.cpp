#include "asal/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "asal/error.hpp"
#include "asal/kernels.hpp"
#include "asal/rng.hpp"

namespace asal {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seeds are read as size_t");

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Strict reader for one JSON object: typed lookups, unknown keys rejected.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const char* key) const { return obj_.contains(key); }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void get(const char* key, std::size_t& out) {
    if (auto* v = child(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(path(key) + ": expected a non-negative integer");
      out = v->get<std::size_t>();
    }
  }
  void get(const char* key, double& out) {
    if (auto* v = child(key)) {
      if (!v->is_number()) throw ConfigError(path(key) + ": expected a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, bool& out) {
    if (auto* v = child(key)) {
      if (!v->is_boolean()) throw ConfigError(path(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::string& out) {
    if (auto* v = child(key)) {
      if (!v->is_string()) throw ConfigError(path(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }
  template <typename T>
  void get(const char* key, std::vector<T>& out) {
    if (auto* v = child(key)) {
      if (!v->is_array()) throw ConfigError(path(key) + ": expected an array");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        const json& e = (*v)[i];
        const std::string at = path(key) + "[" + std::to_string(i) + "]";
        if constexpr (std::is_floating_point_v<T>) {
          if (!e.is_number()) throw ConfigError(at + ": expected a number");
        } else if constexpr (std::is_signed_v<T>) {
          if (!e.is_number_integer()) throw ConfigError(at + ": expected an integer");
        } else {
          if (!e.is_number_unsigned()) throw ConfigError(at + ": expected a non-negative integer");
        }
        out.push_back(e.get<T>());
      }
    }
  }

  /// Parses a string field through `convert`, prefixing errors with the path.
  template <typename F>
  void get_enum(const char* key, F convert) {
    std::string name;
    get(key, name);
    if (!has(key)) return;
    try {
      convert(name);
    } catch (const ConfigError& e) {
      throw ConfigError(path(key) + ": " + e.what());
    }
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(path(it.key().c_str()) + ": unknown field");
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_train(Fields& f, TrainConfig& t) {
  f.get("epochs", t.epochs);
  f.get("batch_size", t.batch_size);
  f.get("learning_rate", t.learning_rate);
}

void read_activation(Fields& f, LayerKind& out) {
  f.get_enum("activation", [&](const std::string& s) { out = layer_kind_from_string(s); });
}

DatasetKind dataset_kind_from_string(std::string_view name) {
  for (auto k : {DatasetKind::kGaussianMixture, DatasetKind::kTwoMoons, DatasetKind::kCsv, DatasetKind::kIdx})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown dataset kind '" + std::string(name) +
                    "' (valid: gaussian-mixture, two-moons, csv, idx)");
}

void read_dataset(const json& j, DatasetConfig& d) {
  Fields f(j, "dataset");
  f.get_enum("kind", [&](const std::string& s) { d.kind = dataset_kind_from_string(s); });
  switch (d.kind) {
    case DatasetKind::kGaussianMixture: {
      auto& m = d.mixture;
      f.get("components", m.components);
      f.get("classes", m.classes);
      f.get("dim", m.dim);
      f.get("separation", m.separation);
      f.get("spread", m.spread);
      f.get("spreads", m.spreads);
      f.get("class_map", m.class_map);
      f.get("weights", m.weights);
      f.get("pool_size", m.pool_size);
      f.get("test_size", m.test_size);
      f.get("seed", m.seed);
      if (auto* means = f.child("means")) {
        if (!means->is_array()) throw ConfigError("dataset.means: expected an array of rows");
        Matrix mu;
        for (std::size_t r = 0; r < means->size(); ++r) {
          const json& row = (*means)[r];
          const std::string at = "dataset.means[" + std::to_string(r) + "]";
          if (!row.is_array()) throw ConfigError(at + ": expected an array");
          std::vector<double> values;
          for (const auto& v : row) {
            if (!v.is_number()) throw ConfigError(at + ": expected numbers");
            values.push_back(v.get<double>());
          }
          if (r == 0) mu = Matrix(0, values.size());
          if (values.size() != mu.cols()) throw ConfigError(at + ": ragged row");
          mu.append_row(values);
        }
        m.means = std::move(mu);
      }
      break;
    }
    case DatasetKind::kTwoMoons:
      f.get("noise", d.moons.noise);
      f.get("pool_size", d.moons.pool_size);
      f.get("test_size", d.moons.test_size);
      f.get("seed", d.moons.seed);
      break;
    case DatasetKind::kCsv: {
      std::string path;
      f.get("path", path);
      d.csv = path;
      f.get("label_column", d.csv_options.label_column);
      if (f.has("has_header")) {
        bool header = true;
        f.get("has_header", header);
        d.csv_options.has_header = header;
      }
      std::string delimiter;
      f.get("delimiter", delimiter);
      if (f.has("delimiter")) {
        if (delimiter.size() != 1) throw ConfigError("dataset.delimiter: expected one character");
        d.csv_options.delimiter = delimiter[0];
      }
      f.get("test_size", d.test_size);
      f.get("seed", d.seed);
      break;
    }
    case DatasetKind::kIdx: {
      std::string images, labels;
      f.get("images", images);
      f.get("labels", labels);
      d.idx_images = images;
      d.idx_labels = labels;
      f.get("test_size", d.test_size);
      f.get("seed", d.seed);
      break;
    }
  }
  f.finish();
}

SplitRule split_rule_from_string(std::string_view name) {
  if (name == "max-spread") return SplitRule::kMaxSpread;
  if (name == "cycle") return SplitRule::kCycle;
  throw ConfigError("unknown split rule '" + std::string(name) + "' (valid: max-spread, cycle)");
}

std::string_view to_string(SplitRule rule) { return rule == SplitRule::kCycle ? "cycle" : "max-spread"; }

Pool split_off(const Pool& pool, std::span<const std::size_t> rows) {
  const Matrix x = pool.samples().gather_rows(rows);
  std::vector<int> y;
  y.reserve(rows.size());
  for (auto r : rows) y.push_back(pool.hidden_labels()[r]);
  return Pool(x, std::move(y), pool.classes(), pool.image_shape());
}

Dataset split_dataset(const Pool& all, std::size_t test_size, std::uint64_t seed) {
  if (test_size >= all.size()) throw ConfigError("dataset.test_size must be below the row count");
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_size));
  std::vector<std::size_t> pool(order.begin() + static_cast<std::ptrdiff_t>(test_size), order.end());
  std::sort(test.begin(), test.end());
  std::sort(pool.begin(), pool.end());
  Dataset ds;
  ds.pool = split_off(all, pool);
  ds.test = split_off(all, test);
  return ds;
}

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kGaussianMixture: return "gaussian-mixture";
    case DatasetKind::kTwoMoons: return "two-moons";
    case DatasetKind::kCsv: return "csv";
    case DatasetKind::kIdx: return "idx";
  }
  return "unknown";
}

std::string_view to_string(RunStatus status) {
  return status == RunStatus::kCompleted ? "completed" : "exhausted";
}

std::size_t ExperimentConfig::planned_cycles() const {
  if (budget <= initial) return 0;
  return (budget - initial + new_per_cycle - 1) / new_per_cycle;
}

void ExperimentConfig::validate() const {
  if (initial == 0) throw ConfigError("initial: must be >= 1");
  if (new_per_cycle == 0) throw ConfigError("new_per_cycle: must be >= 1");
  if (budget < initial) throw ConfigError("budget: must be >= initial");
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (pca_dim == 0) throw ConfigError("pca_dim: must be >= 1");
  if (synthesis.steps == 0) throw ConfigError("synthesis.steps: must be >= 1");
  if (overgenerate_factor == 0) throw ConfigError("overgenerate_factor: must be >= 1");
  if (neighbors == 0) throw ConfigError("neighbors: must be >= 1");
  if (classifier.train.epochs == 0 || classifier.train.batch_size == 0)
    throw ConfigError("classifier: epochs and batch_size must be >= 1");
  if (stratified_initial && oracle == OracleKind::kHuman)
    throw ConfigError("stratified_initial: needs the simulated oracle");
  if (strategy == StrategyKind::kGaal && oracle == OracleKind::kHuman)
    throw ConfigError("strategy: gaal needs the simulated oracle");
  if (dataset.kind == DatasetKind::kGaussianMixture && dataset.mixture.pool_size <= budget)
    throw ConfigError("budget: must be below dataset.pool_size");
  if (dataset.kind == DatasetKind::kTwoMoons && dataset.moons.pool_size <= budget)
    throw ConfigError("budget: must be below dataset.pool_size");
  if (dataset.kind == DatasetKind::kCsv && dataset.csv.empty()) throw ConfigError("dataset.path: required");
  if (dataset.kind == DatasetKind::kIdx && (dataset.idx_images.empty() || dataset.idx_labels.empty()))
    throw ConfigError("dataset.images / dataset.labels: required");
  if ((dataset.kind == DatasetKind::kCsv || dataset.kind == DatasetKind::kIdx) && dataset.test_size == 0)
    throw ConfigError("dataset.test_size: must be >= 1");
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  Fields f(doc, "");
  std::size_t version = 0;
  if (!f.has("schema_version")) throw ConfigError("schema_version: required");
  f.get("schema_version", version);
  if (version != kConfigSchemaVersion)
    throw ConfigError("schema_version: unsupported version " + std::to_string(version));

  if (auto* d = f.child("dataset")) read_dataset(*d, c.dataset);
  if (auto* j = f.child("classifier")) {
    Fields g(*j, "classifier");
    g.get("hidden", c.classifier.hidden);
    read_activation(g, c.classifier.activation);
    read_train(g, c.classifier.train);
    g.finish();
  }
  f.get_enum("strategy", [&](const std::string& s) { c.strategy = strategy_from_string(s); });
  f.get_enum("extractor", [&](const std::string& s) { c.extractor = extractor_kind_from_string(s); });
  f.get("pca_dim", c.pca_dim);
  f.get("budget", c.budget);
  f.get("new_per_cycle", c.new_per_cycle);
  f.get("initial", c.initial);
  f.get("stratified_initial", c.stratified_initial);
  f.get("seeds", c.seeds);
  f.get_enum("oracle", [&](const std::string& s) {
    if (s == "simulated") c.oracle = ExperimentConfig::OracleKind::kSimulated;
    else if (s == "human") c.oracle = ExperimentConfig::OracleKind::kHuman;
    else throw ConfigError("unknown oracle '" + s + "' (valid: simulated, human)");
  });
  if (auto* j = f.child("generator")) {
    Fields g(*j, "generator");
    g.get_enum("kind", [&](const std::string& s) {
      if (s == "mixture") c.generator.kind = GeneratorConfig::Kind::kMixture;
      else if (s == "decoder") c.generator.kind = GeneratorConfig::Kind::kDecoder;
      else throw ConfigError("unknown generator '" + s + "' (valid: mixture, decoder)");
    });
    g.get("components", c.generator.mixture.components);
    g.get("temperature", c.generator.mixture.temperature);
    g.get("iterations", c.generator.mixture.iterations);
    g.get("seed", c.generator.mixture.seed);
    g.finish();
  }
  if (auto* j = f.child("synthesis")) {
    Fields g(*j, "synthesis");
    g.get("steps", c.synthesis.steps);
    g.get("learning_rate", c.synthesis.optimizer.alpha);
    g.get("beta1", c.synthesis.optimizer.beta1);
    g.get("beta2", c.synthesis.optimizer.beta2);
    g.get("epsilon", c.synthesis.optimizer.epsilon);
    g.finish();
  }
  if (auto* j = f.child("autoencoder")) {
    Fields g(*j, "autoencoder");
    g.get("feature_width", c.autoencoder.feature_width);
    g.get("hidden", c.autoencoder.hidden);
    read_activation(g, c.autoencoder.activation);
    read_train(g, c.autoencoder.train);
    g.get("seed", c.autoencoder.train.seed);
    g.finish();
  }
  if (auto* j = f.child("critic")) {
    Fields g(*j, "critic");
    g.get("hidden", c.critic.hidden);
    read_activation(g, c.critic.activation);
    read_train(g, c.critic.train);
    g.get("seed", c.critic.train.seed);
    g.finish();
  }
  f.get("overgenerate_factor", c.overgenerate_factor);
  f.get("neighbors", c.neighbors);
  f.get_enum("split_rule", [&](const std::string& s) { c.split_rule = split_rule_from_string(s); });
  f.finish();
  c.validate();
  return c;
}

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t offset = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n');
    throw ConfigError("config line " + std::to_string(line) + ": malformed JSON");
  }
  return config_from_json(doc);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c = parse_config(ss.str());
  // Data paths are relative to the config file.
  auto resolve = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = path.parent_path() / p;
  };
  resolve(c.dataset.csv);
  resolve(c.dataset.idx_images);
  resolve(c.dataset.idx_labels);
  return c;
}

ordered_json config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["schema_version"] = kConfigSchemaVersion;
  ordered_json d;
  d["kind"] = to_string(c.dataset.kind);
  switch (c.dataset.kind) {
    case DatasetKind::kGaussianMixture: {
      const auto& m = c.dataset.mixture;
      d["components"] = m.components;
      d["classes"] = m.classes;
      d["dim"] = m.dim;
      d["separation"] = m.separation;
      d["spread"] = m.spread;
      if (!m.spreads.empty()) d["spreads"] = m.spreads;
      if (!m.class_map.empty()) d["class_map"] = m.class_map;
      if (!m.weights.empty()) d["weights"] = m.weights;
      if (m.means.rows() > 0) {
        ordered_json rows = ordered_json::array();
        for (std::size_t r = 0; r < m.means.rows(); ++r) {
          auto row = m.means.row(r);
          rows.push_back(std::vector<double>(row.begin(), row.end()));
        }
        d["means"] = rows;
      }
      d["pool_size"] = m.pool_size;
      d["test_size"] = m.test_size;
      d["seed"] = m.seed;
      break;
    }
    case DatasetKind::kTwoMoons:
      d["noise"] = c.dataset.moons.noise;
      d["pool_size"] = c.dataset.moons.pool_size;
      d["test_size"] = c.dataset.moons.test_size;
      d["seed"] = c.dataset.moons.seed;
      break;
    case DatasetKind::kCsv:
      d["path"] = c.dataset.csv.string();
      d["label_column"] = c.dataset.csv_options.label_column;
      if (c.dataset.csv_options.has_header) d["has_header"] = *c.dataset.csv_options.has_header;
      d["delimiter"] = std::string(1, c.dataset.csv_options.delimiter);
      d["test_size"] = c.dataset.test_size;
      d["seed"] = c.dataset.seed;
      break;
    case DatasetKind::kIdx:
      d["images"] = c.dataset.idx_images.string();
      d["labels"] = c.dataset.idx_labels.string();
      d["test_size"] = c.dataset.test_size;
      d["seed"] = c.dataset.seed;
      break;
  }
  j["dataset"] = d;
  j["classifier"] = {{"hidden", c.classifier.hidden},
                     {"activation", to_string(c.classifier.activation)},
                     {"epochs", c.classifier.train.epochs},
                     {"batch_size", c.classifier.train.batch_size},
                     {"learning_rate", c.classifier.train.learning_rate}};
  j["strategy"] = to_string(c.strategy);
  j["extractor"] = to_string(c.extractor);
  j["pca_dim"] = c.pca_dim;
  j["budget"] = c.budget;
  j["new_per_cycle"] = c.new_per_cycle;
  j["initial"] = c.initial;
  j["stratified_initial"] = c.stratified_initial;
  j["seeds"] = c.seeds;
  j["oracle"] = c.oracle == ExperimentConfig::OracleKind::kHuman ? "human" : "simulated";
  j["generator"] = {{"kind", c.generator.kind == GeneratorConfig::Kind::kDecoder ? "decoder" : "mixture"},
                    {"components", c.generator.mixture.components},
                    {"temperature", c.generator.mixture.temperature},
                    {"iterations", c.generator.mixture.iterations},
                    {"seed", c.generator.mixture.seed}};
  j["synthesis"] = {{"steps", c.synthesis.steps},
                    {"learning_rate", c.synthesis.optimizer.alpha},
                    {"beta1", c.synthesis.optimizer.beta1},
                    {"beta2", c.synthesis.optimizer.beta2},
                    {"epsilon", c.synthesis.optimizer.epsilon}};
  j["autoencoder"] = {{"feature_width", c.autoencoder.feature_width},
                      {"hidden", c.autoencoder.hidden},
                      {"activation", to_string(c.autoencoder.activation)},
                      {"epochs", c.autoencoder.train.epochs},
                      {"batch_size", c.autoencoder.train.batch_size},
                      {"learning_rate", c.autoencoder.train.learning_rate},
                      {"seed", c.autoencoder.train.seed}};
  j["critic"] = {{"hidden", c.critic.hidden},
                 {"activation", to_string(c.critic.activation)},
                 {"epochs", c.critic.train.epochs},
                 {"batch_size", c.critic.train.batch_size},
                 {"learning_rate", c.critic.train.learning_rate},
                 {"seed", c.critic.train.seed}};
  j["overgenerate_factor"] = c.overgenerate_factor;
  j["neighbors"] = c.neighbors;
  j["split_rule"] = to_string(c.split_rule);
  return j;
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_to_json(config).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Dataset load_dataset(const DatasetConfig& config) {
  switch (config.kind) {
    case DatasetKind::kGaussianMixture: return make_gaussian_mixture(config.mixture);
    case DatasetKind::kTwoMoons: return make_two_moons(config.moons);
    case DatasetKind::kCsv: return split_dataset(load_csv(config.csv, config.csv_options), config.test_size, config.seed);
    case DatasetKind::kIdx:
      return split_dataset(load_idx(config.idx_images, config.idx_labels), config.test_size, config.seed);
  }
  throw ConfigError("unknown dataset kind");
}

ordered_json metrics_to_json(const CycleMetrics& m) {
  ordered_json j;
  j["schema_version"] = kMetricsSchemaVersion;
  j["seed"] = m.seed;
  j["strategy"] = m.strategy;
  j["cycle"] = m.cycle;
  j["labeled"] = m.labeled;
  j["accuracy"] = m.accuracy;
  j["new_sample_entropy"] = optional_number(m.new_sample_entropy);
  j["selected"] = m.selected;
  j["skipped"] = m.skipped;
  j["class_counts"] = m.class_counts;
  j["synthetic_entropy"] = optional_number(m.synthetic_entropy);
  j["selection_seconds"] = m.selection_seconds;
  return j;
}

CycleMetrics metrics_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("metrics record is not an object");
  if (j.value("schema_version", 0) != kMetricsSchemaVersion) throw ParseError("unsupported metrics schema");
  CycleMetrics m;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    m.strategy = j.at("strategy").get<std::string>();
    m.cycle = j.at("cycle").get<std::size_t>();
    m.labeled = j.at("labeled").get<std::size_t>();
    m.accuracy = j.at("accuracy").get<double>();
    if (!j.at("new_sample_entropy").is_null()) m.new_sample_entropy = j.at("new_sample_entropy").get<double>();
    m.selected = j.at("selected").get<std::size_t>();
    m.skipped = j.at("skipped").get<std::size_t>();
    m.class_counts = j.at("class_counts").get<std::vector<std::size_t>>();
    if (!j.at("synthetic_entropy").is_null()) m.synthetic_entropy = j.at("synthetic_entropy").get<double>();
    m.selection_seconds = j.at("selection_seconds").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("metrics record: ") + e.what());
  }
  return m;
}

void write_metrics_jsonl(const std::filesystem::path& path, const std::vector<CycleMetrics>& cycles) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& m : cycles) out << metrics_to_json(m).dump() << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<CycleMetrics> read_metrics_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<CycleMetrics> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(metrics_from_json(json::parse(line)));
    } catch (const json::parse_error&) {
      throw ParseError(path.string() + ":" + std::to_string(number) + ": malformed JSON");
    }
  }
  return out;
}

AsalResources prepare_asal(const Pool& pool, const ExperimentConfig& config) {
  AsalResources res;
  if (!uses_generator(config.strategy)) return res;
  const Matrix& x = pool.samples();

  const bool need_ae = config.extractor == ExtractorKind::kAutoencoder ||
                       config.generator.kind == GeneratorConfig::Kind::kDecoder;
  if (need_ae) {
    auto start = Clock::now();
    res.autoencoder = train_autoencoder(x, config.autoencoder);
    res.times.autoencoder = seconds_since(start);
  }

  auto start = Clock::now();
  if (config.generator.kind == GeneratorConfig::Kind::kDecoder)
    res.generator = std::make_unique<DecoderGenerator>(res.autoencoder->decoder());
  else
    res.generator = std::make_unique<MixtureGenerator>(fit_mixture_generator(x, config.generator.mixture));
  res.times.generator = seconds_since(start);

  if (!uses_matching(config.strategy)) return res;

  switch (config.extractor) {
    case ExtractorKind::kRaw: res.extractor = FeatureExtractor::raw(pool.width()); break;
    case ExtractorKind::kAutoencoder: res.extractor = FeatureExtractor::autoencoder(*res.autoencoder); break;
    case ExtractorKind::kCritic: {
      start = Clock::now();
      res.critic = train_critic(x, *res.generator, config.critic);
      res.times.critic = seconds_since(start);
      res.extractor = FeatureExtractor::critic(*res.critic);
      break;
    }
    case ExtractorKind::kClassifier: return res;  // rebuilt every cycle
  }

  start = Clock::now();
  const Matrix raw = res.extractor->extract(x);
  res.times.extraction = seconds_since(start);
  start = Clock::now();
  PcaModel pca = fit_pca(raw, clamp_pca_width(config.pca_dim, raw.cols()));
  res.times.pca = seconds_since(start);
  start = Clock::now();
  Matrix projected = kernels::parallel::project(raw, pca.mean, pca.components);
  res.times.extraction += seconds_since(start);
  res.features = FeatureSet{std::move(projected), std::move(pca)};
  start = Clock::now();
  res.tree = KdTree::build(res.features->features, config.split_rule);
  res.times.tree = seconds_since(start);
  return res;
}

double evaluate(const Classifier& classifier, const Pool& test) {
  if (test.size() == 0) throw ArgumentError("cannot evaluate on an empty test set");
  const auto predicted = classifier.predict(test.samples());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == test.hidden_labels()[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

SeedAggregate aggregate_seeds(const std::vector<std::vector<double>>& series) {
  if (series.empty()) throw ArgumentError("no series to aggregate");
  const std::size_t n = series.front().size();
  for (const auto& s : series)
    if (s.size() != n) throw AlignmentError("series lengths differ across seeds");
  SeedAggregate out;
  out.mean.assign(n, 0.0);
  out.min.assign(n, 0.0);
  out.max.assign(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    // Sorted so the mean does not depend on seed order.
    std::vector<double> values;
    for (const auto& s : series) values.push_back(s[c]);
    std::sort(values.begin(), values.end());
    out.min[c] = values.front();
    out.max[c] = values.back();
    out.mean[c] = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  }
  return out;
}

std::vector<double> accuracy_series(const RunResult& run) {
  std::vector<double> out;
  for (const auto& m : run.cycles) out.push_back(m.accuracy);
  return out;
}

namespace {

// Mutable state of one active-learning run.
class Loop {
 public:
  Loop(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed, Oracle& oracle,
       const AsalResources& res, const RunHooks& hooks)
      : cfg_(cfg), data_(data), pool_(data.pool), seed_(seed), oracle_(oracle), res_(res),
        hooks_(hooks), mask_(pool_.size()), synthetic_(0, pool_.width()) {}

  RunResult run() {
    label_initial();
    for (std::size_t cycle = 0;; ++cycle) {
      phase("training");
      Classifier h = train(cycle);
      CycleMetrics m = base_metrics(cycle, h);
      const std::size_t labeled = training_size();
      if (labeled >= cfg_.budget || exhausted_) {
        finish(m, std::move(h));
        break;
      }
      const std::size_t n = std::min(cfg_.new_per_cycle, cfg_.budget - labeled);
      if (cfg_.strategy != StrategyKind::kGaal && mask_.unmasked_count() < n) {
        result_.status = RunStatus::kExhausted;
        finish(m, std::move(h));
        break;
      }
      phase("selecting");
      const std::size_t added = select_and_label(cycle, h, n, m);
      emit(m);
      if (added == 0) {
        // Nothing could be labeled; stop rather than loop forever.
        result_.status = RunStatus::kExhausted;
        exhausted_ = true;
      }
    }
    phase("completed");
    return std::move(result_);
  }

 private:
  void phase(std::string_view name) const {
    if (hooks_.on_phase) hooks_.on_phase(name);
  }

  void emit(const CycleMetrics& m) {
    result_.cycles.push_back(m);
    if (hooks_.on_cycle) hooks_.on_cycle(m);
  }

  void finish(CycleMetrics& m, Classifier h) {
    emit(m);
    result_.final_classifier = std::move(h);
  }

  std::size_t training_size() const { return train_labels_.size() + synthetic_labels_.size(); }

  void check_label(const std::optional<int>& y) const {
    if (y && (*y < 0 || static_cast<std::size_t>(*y) >= pool_.classes()))
      throw ArgumentError("oracle returned label " + std::to_string(*y) + " outside [0, " +
                          std::to_string(pool_.classes()) + ")");
  }

  // Asks the oracle; labeled samples join the training set, skipped ones are
  // masked. Returns the positions (into `indices`) that were skipped.
  std::vector<std::size_t> annotate(std::span<const std::size_t> indices, std::size_t cycle) {
    phase("labeling");
    const auto labels = oracle_.label_pool(pool_, indices, cycle);
    if (labels.size() != indices.size()) throw StateError("oracle answered the wrong number of samples");
    std::vector<std::size_t> skipped;
    for (std::size_t i = 0; i < indices.size(); ++i) {
      check_label(labels[i]);
      mask_.set(indices[i]);
      if (labels[i]) {
        result_.labeled_indices.push_back(indices[i]);
        train_labels_.push_back(*labels[i]);
        added_this_cycle_.push_back(indices[i]);
      } else {
        result_.skipped_indices.push_back(indices[i]);
        skipped.push_back(i);
      }
    }
    return skipped;
  }

  std::vector<std::size_t> initial_indices(Rng& rng) const {
    std::vector<std::size_t> all(pool_.size());
    std::iota(all.begin(), all.end(), 0);
    if (!cfg_.stratified_initial) {
      rng.shuffle(all);
      all.resize(cfg_.initial);
      return all;
    }
    // Per-class quotas proportional to the pool distribution, largest remainder.
    const std::size_t m = pool_.classes();
    std::vector<std::vector<std::size_t>> by_class(m);
    for (auto i : all) by_class[static_cast<std::size_t>(pool_.hidden_labels()[i])].push_back(i);
    std::vector<std::size_t> quota(m);
    std::vector<std::pair<double, std::size_t>> remainder;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < m; ++c) {
      const double exact = static_cast<double>(cfg_.initial) * static_cast<double>(by_class[c].size()) /
                           static_cast<double>(pool_.size());
      quota[c] = static_cast<std::size_t>(std::floor(exact));
      assigned += quota[c];
      remainder.emplace_back(-(exact - std::floor(exact)), c);
    }
    std::sort(remainder.begin(), remainder.end());
    for (std::size_t r = 0; assigned < cfg_.initial; ++r, ++assigned) ++quota[remainder[r % m].second];
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < m; ++c) {
      rng.shuffle(by_class[c]);
      for (std::size_t k = 0; k < std::min(quota[c], by_class[c].size()); ++k) out.push_back(by_class[c][k]);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  void label_initial() {
    if (pool_.size() < cfg_.initial) throw ConfigError("initial: larger than the pool");
    Rng rng(mix_seed(seed_, 0x1417));
    auto pending = initial_indices(rng);
    while (!pending.empty()) {
      const auto skipped = annotate(pending, 0);
      if (skipped.empty()) break;
      if (mask_.unmasked_count() < skipped.size()) {
        exhausted_ = true;
        result_.status = RunStatus::kExhausted;
        break;
      }
      auto rest = mask_.unmasked_indices();
      rng.shuffle(rest);
      pending.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(skipped.size()));
    }
    added_this_cycle_.clear();
    if (train_labels_.empty()) throw StateError("no initial sample was labeled");
  }

  Classifier train(std::size_t cycle) const {
    Matrix x = pool_.samples().gather_rows(result_.labeled_indices);
    x.append_rows(synthetic_);
    std::vector<int> y = train_labels_;
    for (auto v : synthetic_labels_) y.push_back(v);
    ClassifierConfig c = cfg_.classifier;
    c.train.seed = mix_seed(seed_, 0x7000 + cycle);
    return train_classifier(x, y, pool_.classes(), c);
  }

  CycleMetrics base_metrics(std::size_t cycle, const Classifier& h) const {
    CycleMetrics m;
    m.seed = seed_;
    m.strategy = std::string(to_string(cfg_.strategy));
    m.cycle = cycle;
    m.labeled = training_size();
    m.accuracy = evaluate(h, data_.test);
    m.class_counts.assign(pool_.classes(), 0);
    for (auto y : train_labels_) ++m.class_counts[static_cast<std::size_t>(y)];
    for (auto y : synthetic_labels_) ++m.class_counts[static_cast<std::size_t>(y)];
    return m;
  }

  // Builds the per-cycle matching context; classifier features are rebuilt here.
  MatchingContext context(const Classifier& h) {
    MatchingContext ctx;
    ctx.synthesis = cfg_.synthesis;
    ctx.overgenerate_factor = cfg_.overgenerate_factor;
    ctx.neighbors = cfg_.neighbors;
    ctx.generator = res_.generator.get();
    if (!uses_matching(cfg_.strategy)) return ctx;
    if (cfg_.extractor == ExtractorKind::kClassifier) {
      cls_extractor_ = FeatureExtractor::classifier(h);
      const Matrix raw = cls_extractor_->extract(pool_.samples());
      PcaModel pca = fit_pca(raw, clamp_pca_width(cfg_.pca_dim, raw.cols()));
      Matrix projected = kernels::parallel::project(raw, pca.mean, pca.components);
      cls_features_ = FeatureSet{std::move(projected), std::move(pca)};
      cls_tree_ = KdTree::build(cls_features_->features, cfg_.split_rule);
      ctx.extractor = &*cls_extractor_;
      ctx.features = &*cls_features_;
      ctx.tree = &*cls_tree_;
    } else {
      ctx.extractor = res_.extractor ? &*res_.extractor : nullptr;
      ctx.features = res_.features ? &*res_.features : nullptr;
      ctx.tree = res_.tree ? &*res_.tree : nullptr;
    }
    return ctx;
  }

  std::size_t select_and_label(std::size_t cycle, const Classifier& h, std::size_t n, CycleMetrics& m) {
    Rng rng(mix_seed(seed_, 0x5E1EC7 + cycle));
    SelectionRequest req;
    req.pool = &pool_;
    req.mask = &mask_;
    req.classifier = &h;
    req.count = n;
    req.rng = &rng;
    req.matching = context(h);
    Matrix coreset_features;
    if (cfg_.strategy == StrategyKind::kCoreset) {
      // Features are re-extracted every cycle from the current classifier.
      const auto start = Clock::now();
      coreset_features = h.penultimate(pool_.samples());
      m.selection_seconds += seconds_since(start);
      req.coreset_features = &coreset_features;
    }

    Selection sel = select(cfg_.strategy, req, &oracle_);
    m.selection_seconds += sel.seconds;
    if (uses_generator(cfg_.strategy)) m.synthetic_entropy = sel.synthetic_entropy;

    added_this_cycle_.clear();
    if (cfg_.strategy == StrategyKind::kGaal) {
      std::vector<double> entropies;
      const auto probs = h.predict_proba(sel.synthetic);
      for (std::size_t i = 0; i < sel.synthetic.rows(); ++i) {
        check_label(sel.synthetic_labels[i]);
        synthetic_.append_row(sel.synthetic.row(i));
        synthetic_labels_.push_back(*sel.synthetic_labels[i]);
        entropies.push_back(row_entropy(probs.row(i)));
      }
      result_.synthetic_labeled += sel.synthetic.rows();
      m.selected = sel.synthetic.rows();
      m.skipped = sel.refused;
      if (!entropies.empty())
        m.new_sample_entropy = std::accumulate(entropies.begin(), entropies.end(), 0.0) /
                               static_cast<double>(entropies.size());
      return sel.synthetic.rows();
    }

    // Query row that produced each pending index, for next-nearest replacement.
    const bool by_query = uses_matching(cfg_.strategy) && sel.queries.rows() == sel.indices.size();
    std::vector<std::size_t> pending = sel.indices;
    Matrix pending_queries = by_query ? sel.queries : Matrix();
    while (!pending.empty()) {
      const auto skipped = annotate(pending, cycle + 1);
      m.skipped += skipped.size();
      if (skipped.empty()) break;
      if (mask_.unmasked_count() < skipped.size()) {
        exhausted_ = true;
        result_.status = RunStatus::kExhausted;
        break;
      }
      const auto start = Clock::now();
      if (by_query) {
        std::vector<std::size_t> rows(skipped.begin(), skipped.end());
        pending_queries = pending_queries.gather_rows(rows);
        QueryMask scratch = mask_;
        pending = match_queries(*req.matching.tree, pending_queries, scratch);
      } else {
        req.count = skipped.size();
        pending = select(cfg_.strategy, req, &oracle_).indices;
      }
      m.selection_seconds += seconds_since(start);
    }

    m.selected = added_this_cycle_.size();
    if (!added_this_cycle_.empty()) {
      const auto scores = entropy(h.predict_proba(pool_.samples().gather_rows(added_this_cycle_))).data();
      m.new_sample_entropy =
          std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
    }
    return added_this_cycle_.size();
  }

  const ExperimentConfig& cfg_;
  const Dataset& data_;
  const Pool& pool_;
  std::uint64_t seed_;
  Oracle& oracle_;
  const AsalResources& res_;
  const RunHooks& hooks_;

  QueryMask mask_;
  std::vector<int> train_labels_;  // aligned with result_.labeled_indices
  Matrix synthetic_;
  std::vector<int> synthetic_labels_;
  std::vector<std::size_t> added_this_cycle_;
  bool exhausted_ = false;
  RunResult result_;

  std::optional<FeatureExtractor> cls_extractor_;
  std::optional<FeatureSet> cls_features_;
  std::optional<KdTree> cls_tree_;
};

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed,
                         Oracle& oracle, const AsalResources* resources, const RunHooks& hooks) {
  config.validate();
  if (data.pool.size() <= config.budget) throw ConfigError("budget: the pool must be larger than the budget");
  if (data.test.size() == 0) throw ConfigError("dataset: empty test set");
  if (data.test.width() != data.pool.width()) throw DimensionError("test and pool widths differ");
  if (config.strategy == StrategyKind::kMinDistance && (!config.classifier.hidden.empty() || data.pool.classes() != 2))
    throw UnsupportedError("min-distance needs a linear classifier on a two-class pool");

  AsalResources local;
  if (!resources) {
    local = prepare_asal(data.pool, config);
    resources = &local;
  }
  Loop loop(config, data, seed, oracle, *resources, hooks);
  return loop.run();
}

}  // namespace asal
