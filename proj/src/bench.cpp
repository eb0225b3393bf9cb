#include "asal/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <new>

#include <json.hpp>

#include "asal/error.hpp"
#include "asal/kernels.hpp"
#include "asal/rng.hpp"

namespace asal {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Prepared {
  std::optional<FeatureExtractor> extractor;
  std::optional<FeatureSet> features;
  std::optional<KdTree> tree;
  PreprocessTimes times;
};

Prepared prepare(StrategyKind strategy, const Pool& pool, const BenchConfig& cfg) {
  Prepared p;
  if (uses_matching(strategy)) {
    p.extractor = FeatureExtractor::raw(pool.width());
    auto start = Clock::now();
    Matrix raw = p.extractor->extract(pool.samples());
    p.times.extraction = seconds_since(start);
    start = Clock::now();
    PcaModel pca = fit_pca(raw, clamp_pca_width(cfg.pca_dim, raw.cols()));
    p.times.pca = seconds_since(start);
    start = Clock::now();
    Matrix projected = kernels::parallel::project(raw, pca.mean, pca.components);
    p.times.extraction += seconds_since(start);
    raw = Matrix();
    p.features = FeatureSet{std::move(projected), std::move(pca)};
    start = Clock::now();
    p.tree = KdTree::build(p.features->features, cfg.split_rule);
    p.times.tree = seconds_since(start);
  }
  return p;
}

}  // namespace

BenchWorkload make_bench_workload(const BenchConfig& cfg) {
  if (cfg.latent_dim == 0 || cfg.width < cfg.latent_dim) throw ConfigError("bench: need 0 < latent_dim <= width");
  GaussianMixtureSpec spec;
  spec.components = cfg.classes;
  spec.classes = cfg.classes;
  spec.dim = cfg.latent_dim;
  spec.separation = cfg.separation;
  spec.spread = 1.0;
  spec.pool_size = cfg.base_size;
  spec.test_size = 0;
  spec.seed = cfg.seed;
  Dataset latent = make_gaussian_mixture(spec);

  Rng rng(mix_seed(cfg.seed, 0xBE7C));
  Matrix a = rng.normal_matrix(cfg.latent_dim, cfg.width);
  const double norm = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  for (auto& v : a.data()) v *= norm;
  Layer layer{LayerSpec::linear(cfg.latent_dim, cfg.width), std::move(a), Matrix(1, cfg.width)};
  return {std::move(latent.pool), Mlp({layer})};
}

Pool make_bench_pool(const BenchWorkload& work, std::size_t size, const BenchConfig& cfg) {
  const Pool latent = replicate_with_jitter(work.latent, size, cfg.jitter, mix_seed(cfg.seed, size));
  Matrix x = matmul(latent.samples(), work.decoder.layers().front().weights);
  Rng rng(mix_seed(cfg.seed, 0x4015E + size));
  for (auto& v : x.data()) v += cfg.noise * rng.normal();
  return Pool(std::move(x), latent.hidden_labels(), latent.classes());
}

double median(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::optional<double> loglog_slope(std::span<const double> sizes, std::span<const double> times) {
  if (sizes.size() != times.size()) throw DimensionError("sizes and times differ in length");
  if (sizes.size() < 4) return std::nullopt;
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (!(sizes[i] > 0.0) || !(times[i] > 0.0)) return std::nullopt;
    mx += std::log(sizes[i]) / n;
    my += std::log(times[i]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double dx = std::log(sizes[i]) - mx;
    sxy += dx * (std::log(times[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

std::optional<std::size_t> transition_point(double preproc, double fast, double slow) {
  if (!std::isfinite(preproc) || !std::isfinite(fast) || !std::isfinite(slow) || preproc < 0.0 ||
      fast < 0.0 || slow < 0.0)
    throw ArgumentError("transition point needs finite non-negative times");
  if (fast >= slow) return std::nullopt;
  auto c = static_cast<std::size_t>(std::floor(preproc / (slow - fast))) + 1;
  // The closed form can be off by one in floating point; settle it on the inequality.
  auto amortised = [&](std::size_t k) {
    const double kd = static_cast<double>(k);
    return preproc + kd * fast < kd * slow;
  };
  while (!amortised(c)) ++c;
  while (c > 1 && amortised(c - 1)) --c;
  return c;
}

ScalingReport time_selection(StrategyKind strategy, std::span<const std::size_t> sizes,
                             std::size_t repeats, const BenchConfig& cfg) {
  if (repeats < 3) throw ArgumentError("repeats must be >= 3");
  if (sizes.empty()) throw ArgumentError("no pool sizes given");
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1]) throw ArgumentError("pool sizes must be strictly ascending");

  const BenchWorkload work = make_bench_workload(cfg);
  const DecoderGenerator generator(work.decoder);

  // Classifier training happens once, outside any timed section.
  const Pool base = make_bench_pool(work, work.latent.size(), cfg);
  std::vector<std::size_t> train_rows;
  for (std::size_t i = 0; i < std::min(cfg.train_samples, base.size()); ++i) train_rows.push_back(i);
  std::vector<int> train_labels;
  for (auto i : train_rows) train_labels.push_back(base.hidden_labels()[i]);
  ClassifierConfig ccfg;
  ccfg.train.epochs = 50;
  ccfg.train.learning_rate = 1e-2;
  ccfg.train.seed = cfg.seed;
  const Classifier classifier =
      train_classifier(base.samples().gather_rows(train_rows), train_labels, cfg.classes, ccfg);

  ScalingReport report;
  report.strategy = std::string(to_string(strategy));
  std::vector<double> ok_sizes, ok_times;
  for (const std::size_t size : sizes) {
    SizeSummary summary;
    summary.pool_size = size;
    try {
      const Pool pool = make_bench_pool(work, size, cfg);
      Prepared prep = prepare(strategy, pool, cfg);
      QueryMask mask(pool.size());
      SimulatedOracle oracle([&](std::span<const double>) -> std::optional<int> { return 0; });

      auto request = [&](Rng& rng) {
        SelectionRequest req;
        req.pool = &pool;
        req.mask = &mask;
        req.classifier = &classifier;
        req.count = cfg.count;
        req.rng = &rng;
        req.matching.generator = &generator;
        req.matching.synthesis = cfg.synthesis;
        if (prep.features) {
          req.matching.extractor = &*prep.extractor;
          req.matching.features = &*prep.features;
          req.matching.tree = &*prep.tree;
        }
        return req;
      };

      kernels::SingleThreadScope single;
      {
        Rng warm(mix_seed(cfg.seed, 0xFFFF));
        (void)select(strategy, request(warm), &oracle);
      }
      std::vector<double> times, visits;
      for (std::size_t r = 0; r < repeats; ++r) {
        Rng rng(mix_seed(cfg.seed, r));
        const auto req = request(rng);
        const auto start = Clock::now();
        const Selection sel = select(strategy, req, &oracle);
        const double elapsed = seconds_since(start);

        TimingRecord rec;
        rec.strategy = report.strategy;
        rec.pool_size = size;
        rec.requested = cfg.count;
        rec.repeat = r;
        rec.seconds = elapsed;
        rec.preprocess = prep.times;
        if (prep.tree && sel.queries.rows() > 0) {
          QueryStats stats;
          for (std::size_t q = 0; q < sel.queries.rows(); ++q) (void)prep.tree->nearest(sel.queries.row(q), mask, &stats);
          rec.nodes_visited = static_cast<double>(stats.nodes_visited) / static_cast<double>(sel.queries.rows());
        }
        times.push_back(elapsed);
        visits.push_back(rec.nodes_visited);
        report.records.push_back(rec);
      }
      summary.median_seconds = median(times);
      summary.median_nodes_visited = median(visits);
      ok_sizes.push_back(static_cast<double>(size));
      ok_times.push_back(summary.median_seconds);
    } catch (const std::bad_alloc&) {
      summary.failed = true;
      TimingRecord rec;
      rec.strategy = report.strategy;
      rec.pool_size = size;
      rec.requested = cfg.count;
      rec.error = "insufficient memory";
      report.records.push_back(rec);
    }
    report.sizes.push_back(summary);
  }
  report.slope = loglog_slope(ok_sizes, ok_times);
  return report;
}

void write_timing_jsonl(const std::filesystem::path& path, const std::vector<ScalingReport>& reports) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& report : reports) {
    for (const auto& r : report.records) {
      nlohmann::ordered_json j;
      j["strategy"] = r.strategy;
      j["size"] = r.pool_size;
      j["requested"] = r.requested;
      j["repeat"] = r.repeat;
      j["time"] = r.seconds;
      j["preprocess"] = {{"generator", r.preprocess.generator}, {"autoencoder", r.preprocess.autoencoder},
                         {"critic", r.preprocess.critic},       {"extraction", r.preprocess.extraction},
                         {"pca", r.preprocess.pca},             {"tree", r.preprocess.tree}};
      j["nodes_visited"] = r.nodes_visited;
      if (!r.error.empty()) j["error"] = r.error;
      out << j.dump() << '\n';
    }
    nlohmann::ordered_json summary;
    summary["strategy"] = report.strategy;
    summary["summary"] = nlohmann::ordered_json::array();
    for (const auto& s : report.sizes)
      summary["summary"].push_back({{"size", s.pool_size},
                                    {"median_time", s.median_seconds},
                                    {"median_nodes_visited", s.median_nodes_visited},
                                    {"failed", s.failed}});
    summary["loglog_slope"] = report.slope ? nlohmann::ordered_json(*report.slope) : nlohmann::ordered_json(nullptr);
    out << summary.dump() << '\n';
  }
}

void write_timing_csv(const std::filesystem::path& path, const std::vector<ScalingReport>& reports) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "size,repeat,strategy,time\n";
  char buf[64];
  for (const auto& report : reports)
    for (const auto& r : report.records) {
      if (!r.error.empty()) continue;
      std::snprintf(buf, sizeof buf, "%.9g", r.seconds);
      out << r.pool_size << ',' << r.repeat << ',' << r.strategy << ',' << buf << '\n';
    }
}

}  // namespace asal
