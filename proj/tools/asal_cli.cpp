// asal: run experiments, time selection strategies, serve the annotation API.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "asal/bench.hpp"
#include "asal/checkpoint.hpp"
#include "asal/error.hpp"
#include "asal/experiment.hpp"
#include "asal/service.hpp"
#include "asal/version.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitUsage = 2;

fs::path output_root() {
  const char* env = std::getenv("ASAL_OUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

int cmd_run(const std::string& config_path, const std::string& strategy, const std::vector<std::uint64_t>& seeds,
            const std::string& out_arg, bool dry_run) {
  asal::ExperimentConfig cfg;
  try {
    cfg = asal::load_config(config_path);
  } catch (const asal::Error& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return kExitConfig;
  }
  if (!strategy.empty()) {
    try {
      cfg.strategy = asal::strategy_from_string(strategy);
    } catch (const asal::ConfigError&) {
      std::cerr << "unknown strategy '" << strategy << "'; valid strategies: " << asal::valid_strategy_names() << '\n';
      return kExitUsage;
    }
  }
  if (!seeds.empty()) cfg.seeds = seeds;
  try {
    cfg.validate();
  } catch (const asal::ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return kExitConfig;
  }
  if (cfg.oracle == asal::ExperimentConfig::OracleKind::kHuman) {
    std::cerr << config_path << ": oracle: human runs go through `asal serve`\n";
    return kExitConfig;
  }

  const std::string hash = asal::config_hash(cfg);
  const fs::path out = out_arg.empty() ? output_root() / hash : fs::path(out_arg);
  if (dry_run) {
    std::cout << "config ok: strategy " << asal::to_string(cfg.strategy) << ", " << cfg.planned_cycles()
              << " cycles per seed, " << cfg.seeds.size() << " seed(s), hash " << hash << "\nwould write to "
              << out.string() << '\n';
    return 0;
  }

  const asal::Dataset data = asal::load_dataset(cfg.dataset);
  const asal::AsalResources resources = asal::prepare_asal(data.pool, cfg);
  fs::create_directories(out / "checkpoints");
  if (resources.autoencoder) asal::save_checkpoint(out / "checkpoints" / "autoencoder.ckpt", *resources.autoencoder);
  if (resources.critic) asal::save_checkpoint(out / "checkpoints" / "critic.ckpt", *resources.critic);

  std::ofstream metrics(out / "metrics.jsonl", std::ios::binary | std::ios::trunc);
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const auto seed : cfg.seeds) {
    asal::SimulatedOracle oracle(data.labeler);
    asal::RunHooks hooks;
    hooks.on_cycle = [&](const asal::CycleMetrics& m) {
      metrics << asal::metrics_to_json(m).dump() << '\n';
      metrics.flush();
      std::cerr << "seed " << m.seed << " cycle " << m.cycle << " labeled " << m.labeled << " accuracy "
                << m.accuracy << '\n';
    };
    const auto result = asal::run_experiment(cfg, data, seed, oracle, &resources, hooks);
    if (result.final_classifier)
      asal::save_checkpoint(out / "checkpoints" / ("classifier-seed" + std::to_string(seed) + ".ckpt"),
                            *result.final_classifier);
    runs.push_back({{"seed", seed},
                    {"status", asal::to_string(result.status)},
                    {"cycles", result.cycles.empty() ? 0 : result.cycles.size() - 1}});
  }

  nlohmann::ordered_json manifest;
  manifest["version"] = asal::kVersion;
  manifest["config_hash"] = hash;
  manifest["metrics_schema_version"] = asal::kMetricsSchemaVersion;
  manifest["seeds"] = cfg.seeds;
  manifest["runs"] = runs;
  manifest["preprocess_seconds"] = {{"generator", resources.times.generator},
                                    {"autoencoder", resources.times.autoencoder},
                                    {"critic", resources.times.critic},
                                    {"extraction", resources.times.extraction},
                                    {"pca", resources.times.pca},
                                    {"tree", resources.times.tree}};
  manifest["config"] = asal::config_to_json(cfg);
  std::ofstream(out / "manifest.json") << manifest.dump(2) << '\n';
  std::cout << out.string() << '\n';
  return 0;
}

int cmd_bench(const std::vector<std::size_t>& sizes, const std::vector<std::string>& strategies,
              std::size_t repeats, std::uint64_t seed, const std::string& out_arg) {
  if (repeats < 3) {
    std::cerr << "--repeats must be >= 3\n";
    return kExitUsage;
  }
  std::vector<asal::StrategyKind> kinds;
  for (const auto& s : strategies) {
    try {
      kinds.push_back(asal::strategy_from_string(s));
    } catch (const asal::ConfigError&) {
      std::cerr << "unknown strategy '" << s << "'; valid strategies: " << asal::valid_strategy_names() << '\n';
      return kExitUsage;
    }
  }
  asal::BenchConfig bc;
  bc.seed = seed;
  std::vector<asal::ScalingReport> reports;
  for (auto kind : kinds) {
    reports.push_back(asal::time_selection(kind, sizes, repeats, bc));
    const auto& r = reports.back();
    for (const auto& s : r.sizes)
      std::cout << r.strategy << " size " << s.pool_size << " median " << s.median_seconds << " s"
                << (s.failed ? " (failed)" : "") << '\n';
    if (r.slope)
      std::cout << r.strategy << " log-log slope " << *r.slope << '\n';
    else
      std::cout << r.strategy << " log-log slope undefined (fewer than 4 sizes)\n";
  }
  const fs::path out = out_arg.empty() ? output_root() / "bench" : fs::path(out_arg);
  fs::create_directories(out);
  asal::write_timing_jsonl(out / "timing.jsonl", reports);
  asal::write_timing_csv(out / "timing.csv", reports);
  std::cout << out.string() << '\n';
  return 0;
}

int cmd_serve(const std::string& config_path, int port, const std::string& host, const std::string& out_arg) {
  asal::ExperimentConfig cfg;
  try {
    cfg = asal::load_config(config_path);
  } catch (const asal::Error& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return kExitConfig;
  }
  const fs::path out = out_arg.empty() ? output_root() / asal::config_hash(cfg) : fs::path(out_arg);
  fs::create_directories(out);
  asal::AnnotationSession session(cfg, asal::load_dataset(cfg.dataset), out / "metrics.jsonl");
  asal::AnnotationServer server(session);
  session.start();
  std::cout << "serving http://" << host << ":" << port << "/v1/session\n" << std::flush;
  server.listen(host, port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active learning with adversarial sample synthesis and nearest-neighbour matching"};
  app.set_version_flag("--version", asal::kVersion);
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment for every configured seed");
  std::string config_path, strategy, out;
  std::vector<std::uint64_t> seeds;
  bool dry_run = false;
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--strategy", strategy, "Override the strategy");
  run->add_option("--seed", seeds, "Override the seed list");
  run->add_option("--out", out, "Output directory (default $ASAL_OUT_ROOT/<config hash>)");
  run->add_flag("--dry-run", dry_run, "Validate the config and exit");

  auto* bench = app.add_subcommand("bench", "Time selection against pool size");
  std::vector<std::size_t> sizes = {10000, 20000, 50000, 100000};
  std::vector<std::string> bench_strategies = {"asal", "max-entropy"};
  std::size_t repeats = 3;
  std::uint64_t bench_seed = 0;
  std::string bench_out;
  bench->add_option("--sizes", sizes, "Ascending pool sizes")->delimiter(',');
  bench->add_option("--strategy", bench_strategies, "Strategies to time")->delimiter(',');
  bench->add_option("--repeats", repeats, "Timed repeats per size (>= 3)");
  bench->add_option("--seed", bench_seed, "Workload seed");
  bench->add_option("--out", bench_out, "Output directory (default $ASAL_OUT_ROOT/bench)");

  auto* serve = app.add_subcommand("serve", "Serve the human annotation API under /v1");
  std::string serve_config, host = "127.0.0.1", serve_out;
  int port = 8080;
  serve->add_option("--config", serve_config, "Experiment config with oracle = human")->required();
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--out", serve_out, "Output directory for metrics");

  auto* transition = app.add_subcommand("transition", "Cycles after which pre-processing pays off");
  double preproc = 0.0, fast = 0.0, slow = 0.0;
  transition->add_option("--preproc", preproc, "Pre-processing seconds")->required();
  transition->add_option("--fast", fast, "Per-cycle seconds of the fast strategy")->required();
  transition->add_option("--slow", slow, "Per-cycle seconds of the slow strategy")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) return cmd_run(config_path, strategy, seeds, out, dry_run);
    if (*bench) return cmd_bench(sizes, bench_strategies, repeats, bench_seed, bench_out);
    if (*serve) return cmd_serve(serve_config, port, host, serve_out);
    if (*transition) {
      const auto c = asal::transition_point(preproc, fast, slow);
      if (c)
        std::cout << *c << '\n';
      else
        std::cout << "no transition: the fast strategy is not faster per cycle\n";
      return 0;
    }
  } catch (const asal::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
