#include <doctest.h>

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "prpm/cli.hpp"
#include "prpm/pipeline.hpp"
#include "prpm/replay.hpp"
#include "support.hpp"

using namespace prpm;
using nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return Result{code, out.str(), err.str()};
}

std::string write_small_log(const test::TempDir& dir) {
  const std::string log = (dir / "log.csv").string();
  const auto r = invoke({"synth", "-o", log, "--seed", "3", "--cases", "400"});
  REQUIRE(r.code == 0);
  return log;
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help, version and usage errors") {
  const auto help = invoke({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("sweep") != std::string::npos);
  CHECK(invoke({"sweep", "--help"}).out.find("--knn-k") != std::string::npos);
  CHECK(invoke({"--version"}).code == 0);
  CHECK(invoke({}).code == 2);
  const auto unknown = invoke({"sweep", "--no-such-flag"});
  CHECK(unknown.code == 2);
  CHECK(unknown.err.rfind("prpm: ", 0) == 0);
}

TEST_CASE("a missing input names the path and exits with 1") {
  test::TempDir dir;
  const std::string missing = (dir / "absent.csv").string();
  const auto r = invoke({"train", "-l", missing, "-m", (dir / "m").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find(missing) != std::string::npos);
  const auto bad_key = invoke({"synth", "-o", (dir / "x.csv").string(), "--set", "nonsense"});
  CHECK(bad_key.code == 1);
}

TEST_CASE("synth writes a log and a manifest") {
  test::TempDir dir;
  const std::string log = write_small_log(dir);
  const json manifest = json::parse(test::read_file(log + ".manifest.json"));
  CHECK(manifest["command"] == "synth");
  CHECK(manifest["seed"] == 3);
  CHECK(manifest["config"]["synth_cases"] == "400");
  const auto text = test::read_file(log);
  CHECK(text.rfind("case_id,activity,timestamp,amount,credit_score,treatment\n", 0) == 0);
}

TEST_CASE("sweep defaults produce the full grid, reproducibly") {
  test::TempDir dir;
  const std::string log = write_small_log(dir);
  const std::string out = (dir / "run1").string();
  const auto r = invoke({"sweep", "-l", log, "-o", out, "--ensemble-size", "3", "--set",
                         "treatment_col=treatment"});
  REQUIRE(r.code == 0);
  const std::string summary = test::read_file(dir / "run1" / "summary.csv");
  CHECK(line_count(summary) == 41);

  const json manifest = json::parse(test::read_file(dir / "run1" / "manifest.json"));
  CHECK(manifest["command"] == "sweep");
  CHECK(manifest["inputs"]["log"]["fnv1a64"] == file_hash(log));
  CHECK(manifest["artifacts"].size() == 42);
  CHECK(manifest["config"]["ensemble_size"] == "3");

  // rerunning from the recorded config reproduces every byte
  const std::string snapshot = (dir / "run1" / "config.snapshot").string();
  REQUIRE(invoke({"sweep", "-l", log, "-o", (dir / "run2").string(), "-c", snapshot}).code == 0);
  CHECK(test::read_file(dir / "run2" / "summary.csv") == summary);
  const std::string ledger = "ledgers/avgProba_CATE_oppCost_R3.csv";
  CHECK(test::read_file(dir / "run2" / ledger) == test::read_file(dir / "run1" / ledger));
}

TEST_CASE("train, index and replay chain through a model directory") {
  test::TempDir dir;
  const std::string log = write_small_log(dir);
  const std::string models = (dir / "models").string();
  REQUIRE(invoke({"train", "-l", log, "-m", models, "--ensemble-size", "3"}).code == 0);
  // replay needs the index
  CHECK(invoke({"replay", "-l", log, "-m", models, "-o", (dir / "r").string()}).code == 1);
  REQUIRE(invoke({"index", "-l", log, "-m", models, "--ensemble-size", "3"}).code == 0);
  const auto r = invoke({"replay", "-l", log, "-m", models, "-o", (dir / "r").string(),
                         "--policy", "avgProba_CATE_tUncer", "--capacity", "2"});
  REQUIRE(r.code == 0);
  std::istringstream summary(test::read_file(dir / "r" / "summary.csv"));
  const auto rows = read_summary(summary);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].policy_name == "avgProba_CATE_tUncer");
  CHECK(rows[0].resources == 2);
  const json manifest = json::parse(test::read_file(dir / "r" / "manifest.json"));
  CHECK(manifest["inputs"]["index.txt"]["fnv1a64"] == file_hash(dir / "models" / "index.txt"));
}

}  // TEST_SUITE
