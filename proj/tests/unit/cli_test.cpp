#include <sstream>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "modpipe/cli.hpp"
#include "support.hpp"

using namespace modpipe;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args, std::shared_ptr<Transport> transport = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err, std::move(transport));
  return {code, out.str(), err.str()};
}

std::string config(int task) { return (testing::kFixtureDir / ("task" + std::to_string(task) + ".json")).string(); }

std::vector<std::string> task3(const std::string& command, const testing::TempDir& dir,
                               std::vector<std::string> extra = {}) {
  std::vector<std::string> args{command, "--config", config(3), "--out", (dir / "out").string(),
                                "--cache-dir", (dir / "cache").string()};
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

}  // namespace

TEST_CASE("plan prints a valid effective configuration") {
  testing::TempDir dir;
  const Result r = run(task3("plan", dir, {"--detector", "svm", "--fusion", "avg"}));
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc.at("task") == 3);
  CHECK(doc.at("fusion_mode") == "avg");
  CHECK(doc.at("detector") == "svm");
  CHECK(doc.at("oversample_factor") == 9);
}

TEST_CASE("flags override the config file") {
  testing::TempDir dir;
  const Result r = run(task3("plan", dir, {"--seed", "99", "--fusion", "concat", "--oversample-factor", "3"}));
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc.at("seed") == 99);
  CHECK(doc.at("fusion_mode") == "concat");
  CHECK(doc.at("oversample_factor") == 3);
  CHECK(doc.at("embedding").at("label_leak") == 0.8);  // untouched value kept from the file
}

TEST_CASE("image fusion on text-only data is a usage error with a hint") {
  testing::TempDir dir;
  const Result r = run({"plan", "--config", config(1), "--fusion", "avg", "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("--fusion text") != std::string::npos);
}

TEST_CASE("usage errors") {
  testing::TempDir dir;
  CHECK(run({"plan", "--no-such-flag"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run(task3("plan", dir, {"--detector", "nearest"})).code == 2);
  CHECK(run({"plan", "--config", config(1), "--detector", "svm"}).code == 2);
  CHECK(run({"train-svm", "--config", config(2), "--out", (dir / "o").string()}).code == 2);
  CHECK(run(task3("plan", dir, {"--oversample-factor", "0"})).code == 4);
}

TEST_CASE("missing inputs map to their exit code") {
  testing::TempDir dir;
  const Result r = run(task3("evaluate", dir));
  CHECK(r.code == 9);
  CHECK(r.err.find("predict") != std::string::npos);
  CHECK(run({"plan", "--config", (dir / "absent.json").string()}).code == 9);
  CHECK(run(task3("plan", dir, {"--test", (dir / "absent.jsonl").string()})).code == 9);
  CHECK(exit_code(ErrorCategory::kMissingFixture) == 8);
  CHECK(exit_code(ErrorCategory::kTransport) == 7);
}

TEST_CASE("task-3 run is byte-identical across reruns and offline") {
  std::string predictions[2], reports[2];
  for (int k = 0; k < 2; ++k) {
    testing::TempDir dir;
    auto counter = std::make_shared<CountingTransport>();
    for (const char* command : {"embed", "train-svm", "predict", "evaluate"}) {
      const Result r = run(task3(command, dir), counter);
      INFO(command << ": " << r.err);
      REQUIRE(r.code == 0);
    }
    CHECK(counter->calls() == 0);
    predictions[k] = testing::slurp(dir / "out" / "predictions_test.jsonl");
    reports[k] = testing::slurp(dir / "out" / "report_test.json");
    CHECK(std::filesystem::exists(dir / "out" / "effective_config.predict.json"));
    CHECK(std::filesystem::exists(dir / "out" / "confusion_test_meme_hate.csv"));
    CHECK_FALSE(predictions[k].empty());
    const Result shown = run(task3("report", dir));
    CHECK(shown.code == 0);
    CHECK(shown.out.find("meme_hate") != std::string::npos);
  }
  CHECK(predictions[0] == predictions[1]);
  CHECK(reports[0] == reports[1]);
}

TEST_CASE("replayed LLM detectors need no network") {
  testing::TempDir dir;
  auto counter = std::make_shared<CountingTransport>();
  for (const char* command : {"predict", "evaluate"}) {
    const Result r = run(task3(command, dir, {"--detector", "llm"}), counter);
    INFO(r.err);
    REQUIRE(r.code == 0);
  }
  const Result t2 = run({"predict", "--config", config(2), "--out", (dir / "t2").string()}, counter);
  INFO(t2.err);
  CHECK(t2.code == 0);
  CHECK(counter->calls() == 0);
}

TEST_CASE("synth writes a loadable fixture set") {
  testing::TempDir dir;
  const Result r = run({"synth", "--out", (dir / "fx").string(), "--seed", "5"});
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(dir / "fx" / "task3.json"));
  CHECK(run({"plan", "--config", (dir / "fx" / "task3.json").string(), "--out", (dir / "o").string()}).code == 0);
}
