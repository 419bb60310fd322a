#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "evolvex/cli.hpp"
#include "evolvex/config.hpp"
#include "evolvex/json_util.hpp"

using namespace evolvex;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class ScratchDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("evolvex_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    unsetenv(kConfigEnvVar);
  }
  void TearDown() override {
    unsetenv(kConfigEnvVar);
    fs::remove_all(dir_);
  }
  std::string at(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST(RunConfig, OverlayNestedSections) {
  RunConfig c;
  apply_config(c, json::parse(R"({"dataset": {"users": 30, "drift": 0.2}, "train": {"strategy": "attention",
      "lambda1": 0.7, "epochs": 9}, "model": {"dim": 16}, "llm": {"provider": "stub"}, "eval_seed": 5})"));
  EXPECT_EQ(c.generator.users, 30);
  EXPECT_EQ(c.generator.drift, 0.2);
  EXPECT_EQ(c.train.strategy, Strategy::Attention);
  EXPECT_EQ(c.model.strategy, Strategy::Attention);
  EXPECT_EQ(c.train.weights.lambda1, 0.7);
  EXPECT_EQ(c.train.epochs, 9);
  EXPECT_EQ(c.model.encoder.dim, 16);
  EXPECT_EQ(c.eval_seed, 5u);
  RunConfig back;
  apply_config(back, run_config_to_json(c));
  EXPECT_EQ(run_config_to_json(back), run_config_to_json(c));
}

TEST(RunConfig, ExternalEncoderKeys) {
  RunConfig c;
  EXPECT_FALSE(c.model.encoder.external.has_value());
  apply_config(c, json::parse(R"({"embed": {"external": {"url": "http://127.0.0.1:9/encode", "timeout_ms": 250}}})"));
  ASSERT_TRUE(c.model.encoder.external.has_value());
  EXPECT_EQ(c.model.encoder.external->url, "http://127.0.0.1:9/encode");
  EXPECT_EQ(c.model.encoder.external->timeout_ms, 250);
  RunConfig back;
  apply_config(back, run_config_to_json(c));
  EXPECT_EQ(back.model.encoder.external->timeout_ms, 250);
  apply_config(c, json::parse(R"({"embed": {"external": {"url": ""}}})"));
  EXPECT_FALSE(c.model.encoder.external.has_value());
  EXPECT_THROW(apply_config(c, json::parse(R"({"embed": {"external": {"uri": "x"}}})")), ConfigError);
}

TEST(RunConfig, UnknownKeysAndBadTypesAreRejected) {
  RunConfig c;
  try {
    apply_config(c, json::parse(R"({"train": {"lamda1": 0.3}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.lamda1"), std::string::npos);
  }
  EXPECT_THROW(apply_config(c, json::parse(R"({"colour": 1})")), ConfigError);
  EXPECT_THROW(apply_config(c, json::parse(R"({"dataset": {"users": "many"}})")), ConfigError);
  EXPECT_THROW(apply_config(c, json::parse(R"({"train": {"strategy": "sum"}})")), ConfigError);
  EXPECT_THROW(apply_config(c, json::parse(R"({"dataset": 3})")), ConfigError);
}

TEST(RunConfig, ValidationCatchesRanges) {
  RunConfig c;
  c.horizon = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.generator.steps = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  EXPECT_NO_THROW(c.validate());
}

TEST_F(ScratchDir, EnvironmentVariableSelectsConfigFile) {
  const auto path = at("custom.json");
  write_json_file(json{{"dataset", {{"users", 14}}}}, path);
  setenv(kConfigEnvVar, path.c_str(), 1);
  ASSERT_EQ(config_path(), path);
  EXPECT_EQ(load_run_config().generator.users, 14);
  setenv(kConfigEnvVar, at("missing.json").c_str(), 1);
  EXPECT_THROW(load_run_config(), ConfigError);
}

TEST_F(ScratchDir, FileValuesAreOverriddenByFlags) {
  const auto path = at("cfg.json");
  write_json_file(json{{"dataset", {{"users", 14}, {"steps", 7}}}}, path);
  setenv(kConfigEnvVar, path.c_str(), 1);
  ASSERT_EQ(run_cli({"generate", "--users", "10", "--out", at("d.json")}).code, cli::kExitOk);
  const auto ds = load_dataset(at("d.json"));
  EXPECT_EQ(ds.users(), 10);
  EXPECT_EQ(ds.steps(), 7);
}

TEST_F(ScratchDir, ExitCodes) {
  EXPECT_EQ(run_cli({"--output-dir", dir_.string(), "generate", "--users", "10"}).code, cli::kExitOk);
  EXPECT_TRUE(fs::exists(at("dataset.json")));

  const auto few = run_cli({"generate", "--steps", "2", "--out", at("x.json")});
  EXPECT_EQ(few.code, cli::kExitUsage);
  EXPECT_NE(few.err.find("steps must be >= 5, got 2"), std::string::npos);

  EXPECT_EQ(run_cli({"train", "--data", at("dataset.json"), "--strategy", "bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"train"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"train", "--data", at("nope.json")}).code, cli::kExitRuntime);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kExitOk);

  write_json_file(json{{"train", {{"epochs", -1}}}}, at("bad.json"));
  setenv(kConfigEnvVar, at("bad.json").c_str(), 1);
  EXPECT_EQ(run_cli({"generate", "--out", at("y.json")}).code, cli::kExitUsage);
}

TEST_F(ScratchDir, PipelineIsByteReproducible) {
  auto pipeline = [&](const std::string& sub) {
    const auto d = (dir_ / sub).string();
    EXPECT_EQ(run_cli({"--output-dir", d, "generate", "--users", "12", "--steps", "8", "--seed", "4"}).code, 0);
    for (const char* s : {"concat", "attention", "crossmodal"}) {
      const auto tr = run_cli({"--output-dir", d, "train", "--data", d + "/dataset.json", "--strategy", s,
                               "--epochs", "6", "--seed", "4"});
      EXPECT_EQ(tr.code, 0) << tr.err;
      const auto ev = run_cli({"--output-dir", d, "eval", "--data", d + "/dataset.json", "--checkpoint",
                               d + "/checkpoint_" + s + ".json", "--seed", "4"});
      EXPECT_EQ(ev.code, 0) << ev.err;
      EXPECT_NE(ev.out.find("perplexity"), std::string::npos);
    }
    const auto fc = run_cli({"--output-dir", d, "forecast", "--data", d + "/dataset.json", "--checkpoint",
                             d + "/checkpoint_crossmodal.json"});
    EXPECT_EQ(fc.code, 0) << fc.err;
    const auto pr = run_cli({"--output-dir", d, "prompt", "--data", d + "/dataset.json", "--provider", "stub"});
    EXPECT_EQ(pr.code, 0) << pr.err;
  };
  pipeline("a");
  pipeline("b");

  std::vector<std::string> files = {"dataset.json", "forecast.json", "report_llm.json"};
  for (const char* s : {"concat", "attention", "crossmodal"}) {
    files.push_back(std::string("checkpoint_") + s + ".json");
    files.push_back(std::string("loss_") + s + ".json");
    files.push_back(std::string("report_") + s + ".json");
  }
  for (const auto& f : files) {
    ASSERT_TRUE(fs::exists(dir_ / "a" / f)) << f;
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }

  for (const char* s : {"concat", "attention", "crossmodal"}) {
    EXPECT_EQ(read_json_file(at(std::string("a/report_") + s + ".json"))["strategy"], s);
  }
  EXPECT_EQ(read_json_file(at("a/forecast.json"))["stages"].size(), 4u);
  const auto llm = read_json_file(at("a/report_llm.json"));
  EXPECT_EQ(llm["strategy"], "llm:stub");
  EXPECT_EQ(llm["parse_failures"], 0);
}

TEST_F(ScratchDir, PromptPrintsRenderedText) {
  ASSERT_EQ(run_cli({"generate", "--users", "10", "--out", at("d.json")}).code, 0);
  const auto r = run_cli({"prompt", "--data", at("d.json"), "--user", "3", "--stage", "2"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("### User Demography"), std::string::npos);
  EXPECT_EQ(run_cli({"prompt", "--data", at("d.json"), "--user", "3", "--stage", "7"}).code, cli::kExitUsage);
}
