#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Sandbox {
  fs::path root;
  Sandbox() : root(fs::temp_directory_path() / "asal_cli_test") {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Sandbox() { fs::remove_all(root); }

  Result run(const std::string& args) const {
    const std::string cmd = "ASAL_OUT_ROOT='" + (root / "runs").string() + "' '" + ASAL_CLI_PATH + "' " + args +
                            " > '" + (root / "stdout").string() + "' 2> '" + (root / "stderr").string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(root / "stdout");
    r.err = slurp(root / "stderr");
    return r;
  }

  fs::path write_config(const std::string& name, const std::string& text) const {
    std::ofstream(root / name) << text;
    return root / name;
  }
};

const char* kConfig = R"({
  "schema_version": 1,
  "dataset": {"kind": "gaussian-mixture", "components": 3, "classes": 3, "dim": 4,
              "pool_size": 300, "test_size": 100, "seed": 1},
  "classifier": {"epochs": 5},
  "strategy": "max-entropy",
  "extractor": "raw",
  "budget": 50,
  "new_per_cycle": 10,
  "initial": 20,
  "seeds": [0]
})";

// Metrics lines without the wall-clock field.
std::vector<json> metrics_without_time(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<json> out;
  while (std::getline(in, line)) {
    json j = json::parse(line);
    j.erase("selection_seconds");
    out.push_back(j);
  }
  return out;
}

}  // namespace

TEST_CASE("unknown strategy exits 2 and lists the valid ones") {
  Sandbox box;
  const auto cfg = box.write_config("c.json", kConfig);
  const Result r = box.run("run --config '" + cfg.string() + "' --strategy magic");
  CHECK(r.code == 2);
  CHECK(r.err.find("max-entropy") != std::string::npos);
  CHECK(r.err.find("asal") != std::string::npos);
  CHECK_FALSE(fs::exists(box.root / "runs"));
}

TEST_CASE("dry run validates and touches nothing") {
  Sandbox box;
  const auto cfg = box.write_config("c.json", kConfig);
  const Result r = box.run("run --config '" + cfg.string() + "' --dry-run");
  CHECK(r.code == 0);
  CHECK(r.out.find("config ok") != std::string::npos);
  CHECK_FALSE(fs::exists(box.root / "runs"));
}

TEST_CASE("config errors exit 1 with a location") {
  Sandbox box;
  const auto bad_json = box.write_config("bad.json", "{\n  \"schema_version\": 1,\n  \"budget\": ,\n}");
  Result r = box.run("run --config '" + bad_json.string() + "'");
  CHECK(r.code == 1);
  CHECK(r.err.find("line 3") != std::string::npos);
  const auto bad_field = box.write_config("field.json", R"({"schema_version": 1, "classifier": {"epoch": 5}})");
  r = box.run("run --config '" + bad_field.string() + "'");
  CHECK(r.code == 1);
  CHECK(r.err.find("classifier.epoch") != std::string::npos);
}

TEST_CASE("run writes deterministic metrics, checkpoints and a manifest") {
  Sandbox box;
  const auto cfg = box.write_config("c.json", kConfig);
  const Result a = box.run("run --config '" + cfg.string() + "' --strategy random --seed 7 --out '" +
                           (box.root / "a").string() + "'");
  REQUIRE(a.code == 0);
  const Result b = box.run("run --config '" + cfg.string() + "' --strategy random --seed 7 --out '" +
                           (box.root / "b").string() + "'");
  REQUIRE(b.code == 0);
  const auto ma = metrics_without_time(box.root / "a" / "metrics.jsonl");
  CHECK(ma.size() == 4);
  CHECK(ma == metrics_without_time(box.root / "b" / "metrics.jsonl"));
  CHECK(ma.front()["seed"] == 7);
  CHECK(ma.front()["strategy"] == "random");
  CHECK(fs::exists(box.root / "a" / "checkpoints" / "classifier-seed7.ckpt"));
  const json manifest = json::parse(slurp(box.root / "a" / "manifest.json"));
  CHECK(manifest["config_hash"].get<std::string>().size() == 16);
  CHECK(manifest["seeds"] == json::array({7}));
  CHECK(manifest["runs"][0]["status"] == "completed");

  // Default output location is keyed by the config hash.
  const Result c = box.run("run --config '" + cfg.string() + "' --strategy random --seed 7");
  REQUIRE(c.code == 0);
  CHECK(fs::exists(box.root / "runs" / manifest["config_hash"].get<std::string>() / "metrics.jsonl"));
}

TEST_CASE("bench validates repeats and writes timing files") {
  Sandbox box;
  CHECK(box.run("bench --sizes 1000,2000 --repeats 2").code == 2);
  CHECK(box.run("bench --sizes 1000,2000 --strategy nope").code == 2);
  const Result r = box.run("bench --sizes 10000,12000 --strategy random --repeats 3 --out '" +
                           (box.root / "bench").string() + "'");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("slope undefined") != std::string::npos);
  CHECK(fs::exists(box.root / "bench" / "timing.jsonl"));
  CHECK(slurp(box.root / "bench" / "timing.csv").rfind("size,repeat,strategy,time\n", 0) == 0);
}

TEST_CASE("transition subcommand") {
  Sandbox box;
  Result r = box.run("transition --preproc 100 --fast 1 --slow 11");
  CHECK(r.code == 0);
  CHECK(r.out == "11\n");
  r = box.run("transition --preproc 1 --fast 2 --slow 1");
  CHECK(r.code == 0);
  CHECK(r.out.find("no transition") != std::string::npos);
}
