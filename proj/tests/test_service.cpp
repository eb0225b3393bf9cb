#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "asal/error.hpp"
#include "asal/service.hpp"

using namespace asal;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ExperimentConfig human_config() {
  ExperimentConfig c;
  c.dataset.mixture.components = 3;
  c.dataset.mixture.classes = 3;
  c.dataset.mixture.dim = 4;
  c.dataset.mixture.pool_size = 200;
  c.dataset.mixture.test_size = 100;
  c.classifier.train.epochs = 5;
  c.strategy = StrategyKind::kMaxEntropy;
  c.budget = 40;
  c.new_per_cycle = 10;
  c.initial = 20;
  c.seeds = {3};
  c.oracle = ExperimentConfig::OracleKind::kHuman;
  return c;
}

json get(httplib::Client& cli, const std::string& path) {
  auto res = cli.Get(path);
  REQUIRE(res);
  REQUIRE(res->status == 200);
  return json::parse(res->body);
}

int post(httplib::Client& cli, const std::string& body) {
  auto res = cli.Post("/v1/labels", body, "application/json");
  REQUIRE(res);
  return res->status;
}

// Labels every pending sample with its ground truth, one POST per sample.
void answer_batch(httplib::Client& cli, const Pool& pool, const json& batch) {
  for (const auto& s : batch["samples"]) {
    const std::string id = s["id"];
    json body;
    body[id] = pool.hidden_labels()[std::stoul(id)];
    CHECK(post(cli, body.dump()) == 200);
  }
}

}  // namespace

TEST_CASE("annotation session requires a human oracle") {
  ExperimentConfig c = human_config();
  c.oracle = ExperimentConfig::OracleKind::kSimulated;
  CHECK_THROWS_AS(AnnotationSession(c, load_dataset(c.dataset)), ConfigError);
}

TEST_CASE("HTTP round trip drives the loop to completion") {
  const ExperimentConfig cfg = human_config();
  const Dataset data = load_dataset(cfg.dataset);
  const fs::path metrics_path = fs::temp_directory_path() / "asal_service_metrics.jsonl";
  AnnotationSession session(cfg, data, metrics_path);
  AnnotationServer server(session);
  const int port = server.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);

  session.start();
  session.wait_until_idle();

  json s = get(cli, "/v1/session");
  CHECK(s["state"] == "labeling");
  CHECK(s["cycle"] == 0);
  CHECK(s["pending"] == 20);
  CHECK(s["budget"] == 40);
  CHECK(s["classes"] == 3);
  CHECK(s["strategy"] == "max-entropy");

  json batch = get(cli, "/v1/batch");
  REQUIRE(batch["samples"].size() == 20);
  const json first = batch["samples"][0];
  CHECK(first["vector"].size() == 4);
  CHECK(first["projection"].size() == 2);
  const std::string id0 = first["id"];

  SUBCASE("malformed and conflicting posts leave the state unchanged") {
    CHECK(post(cli, "{not json") == 400);
    CHECK(post(cli, "[]") == 400);
    CHECK(post(cli, "{}") == 400);
    CHECK(post(cli, json{{id0, 7}}.dump()) == 400);
    CHECK(post(cli, json{{id0, "maybe"}}.dump()) == 400);
    CHECK(post(cli, json{{"999999", 0}}.dump()) == 409);
    CHECK(post(cli, json{{"abc", 0}}.dump()) == 409);
    // An unknown id rejects the whole request, including valid entries.
    CHECK(post(cli, json{{id0, 0}, {"999999", 0}}.dump()) == 409);
    CHECK(get(cli, "/v1/session")["pending"] == 20);

    CHECK(post(cli, json{{id0, data.pool.hidden_labels()[std::stoul(id0)]}}.dump()) == 200);
    CHECK(post(cli, json{{id0, 0}}.dump()) == 409);
    s = get(cli, "/v1/session");
    CHECK(s["pending"] == 19);
    CHECK(s["labeled_in_batch"] == 1);
    CHECK(get(cli, "/v1/batch")["samples"].size() == 19);
  }

  // Finish the initial batch with concurrent posts.
  batch = get(cli, "/v1/batch");
  {
    std::vector<std::thread> workers;
    std::vector<int> codes(batch["samples"].size(), 0);
    for (std::size_t k = 0; k < batch["samples"].size(); ++k) {
      workers.emplace_back([&, k] {
        httplib::Client c("127.0.0.1", port);
        const std::string id = batch["samples"][k]["id"];
        json body;
        body[id] = data.pool.hidden_labels()[std::stoul(id)];
        auto res = c.Post("/v1/labels", body.dump(), "application/json");
        codes[k] = res ? res->status : -static_cast<int>(res.error());
      });
    }
    for (auto& w : workers) w.join();
    for (int code : codes) CHECK(code == 200);
  }

  // Two selection cycles of 10.
  for (std::size_t cycle = 0; cycle < 2; ++cycle) {
    session.wait_until_idle();
    s = get(cli, "/v1/session");
    REQUIRE(s["state"] == "labeling");
    CHECK(s["cycle"] == cycle);
    CHECK(s["pending"] == 10);
    answer_batch(cli, data.pool, get(cli, "/v1/batch"));
  }
  session.wait_until_idle();
  s = get(cli, "/v1/session");
  CHECK(s["state"] == "completed");
  CHECK(s["labeled"] == 40);
  CHECK(get(cli, "/v1/batch")["samples"].empty());

  // /metrics matches the metrics file line by line.
  const json served = get(cli, "/v1/metrics");
  REQUIRE(served["records"].size() == 3);
  std::ifstream in(metrics_path);
  std::string line;
  std::size_t k = 0;
  while (std::getline(in, line)) {
    REQUIRE(k < 3);
    CHECK(json::parse(line) == served["records"][k]);
    ++k;
  }
  CHECK(k == 3);

  // Ground-truth answers reproduce the simulated-oracle run exactly.
  ExperimentConfig sim = cfg;
  sim.oracle = ExperimentConfig::OracleKind::kSimulated;
  SimulatedOracle oracle;
  const RunResult r = run_experiment(sim, data, 3, oracle);
  REQUIRE(r.cycles.size() == 3);
  const auto m = session.metrics();
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(m[i].accuracy == r.cycles[i].accuracy);
    CHECK(m[i].class_counts == r.cycles[i].class_counts);
  }

  server.stop();
  session.stop();
  fs::remove(metrics_path);
}

TEST_CASE("stopping a waiting session cancels it") {
  const ExperimentConfig cfg = human_config();
  AnnotationSession session(cfg, load_dataset(cfg.dataset));
  session.start();
  session.wait_until_idle();
  CHECK(session.state() == "labeling");
  session.stop();
  CHECK(session.state() == "cancelled");
  CHECK(session.session_json().contains("error"));
}

TEST_CASE("skips are replaced within the same cycle") {
  const ExperimentConfig cfg = human_config();
  const Dataset data = load_dataset(cfg.dataset);
  AnnotationSession session(cfg, data);
  session.start();
  session.wait_until_idle();
  json batch = session.batch_json();
  json body;
  for (const auto& s : batch["samples"]) {
    const std::string id = s["id"];
    body[id] = id == batch["samples"][0]["id"] ? json("skip") : json(data.pool.hidden_labels()[std::stoul(id)]);
  }
  CHECK(session.submit(body).status == AnnotationSession::SubmitStatus::kAccepted);
  session.wait_until_idle();
  // One replacement for the skipped sample, still in the initial round.
  CHECK(session.session_json()["pending"] == 1);
  CHECK(session.cycle() == 0);
  session.stop();
}
