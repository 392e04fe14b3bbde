#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "cate/checkpoint.hpp"
#include "cate/cli.hpp"
#include "cate/service.hpp"
#include "test_util.hpp"

namespace cate {
namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "cate");
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new std::filesystem::path(std::filesystem::temp_directory_path() / "cate_cli_test");
    std::filesystem::remove_all(*dir_);
    std::filesystem::create_directories(*dir_ / "models");
    treebank_ = (*dir_ / "tb.txt").string();
    model_ = (*dir_ / "models" / "m.json").string();
    ASSERT_EQ(run({"generate", "--seed", "7", "--n", "100", "--out", treebank_}).code, 0);
    const Outcome trained = run({"train", "--treebank", treebank_, "--out", model_, "--dim", "10", "--epochs", "20",
                             "--report", (*dir_ / "report.json").string()});
    ASSERT_EQ(trained.code, 0) << trained.err;
  }
  static void TearDownTestSuite() {
    std::filesystem::remove_all(*dir_);
    delete dir_;
  }

  static std::filesystem::path* dir_;
  static std::string treebank_;
  static std::string model_;
};

std::filesystem::path* Cli::dir_ = nullptr;
std::string Cli::treebank_;
std::string Cli::model_;

TEST_F(Cli, GenerateWritesSplits) {
  const Treebank bank = parse_treebank_file(treebank_);
  EXPECT_EQ(bank.trees.size(), 100u);
  EXPECT_EQ(bank.count(Split::Train), 80u);
}

TEST_F(Cli, TrainProducesReloadableCheckpointAndReport) {
  const Checkpoint c = load_checkpoint(model_);
  EXPECT_EQ(c.params.dim(), 10);
  EXPECT_FALSE(c.calibration.has_value());
  std::ifstream in(*dir_ / "report.json");
  const auto report = nlohmann::json::parse(in);
  EXPECT_FALSE(report["epochs"].empty());
}

TEST_F(Cli, ParseAscii) {
  const Outcome r = run({"parse", "--model", model_, "--sentence", "set to true", "--beam", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  int leaves = 0;
  while (std::getline(lines, line)) {
    const auto text = line.substr(line.find_first_not_of(' '));
    leaves += text == "set" || text == "to" || text == "true";
  }
  EXPECT_EQ(leaves, 3);
  EXPECT_NE(r.out.find("cum_logprob"), std::string::npos);
}

TEST_F(Cli, ParseJsonMatchesHttpTree) {
  const std::string sentence = "If the system detects an error, a warning window shall be shown.";
  const Outcome r = run({"parse", "--model", model_, "--sentence", sentence, "--beam", "4", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto registry = std::make_shared<ModelRegistry>();
  registry->add({"", model_, load_checkpoint(model_)});
  const ParseService service(registry);
  const HttpReply http = service.parse(nlohmann::json{{"sentence", sentence}, {"beam_width", 4}}.dump());
  EXPECT_EQ(r.out, http.body["tree"].dump() + "\n");
}

TEST_F(Cli, CalibrateThenEval) {
  const std::string calibrated = (*dir_ / "calibrated.json").string();
  const Outcome c = run({"calibrate", "--model", model_, "--treebank", treebank_, "--out", calibrated});
  ASSERT_EQ(c.code, 0) << c.err;
  const Checkpoint cp = load_checkpoint(calibrated);
  ASSERT_TRUE(cp.calibration.has_value());
  EXPECT_LE(cp.calibration->nll_after, cp.calibration->nll_before);

  const std::string report = (*dir_ / "eval.json").string();
  const Outcome e = run({"eval", "--model", calibrated, "--treebank", treebank_, "--split", "test", "--beam", "2",
                     "--temperature", "--json", report});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("labeled F1"), std::string::npos);
  std::ifstream in(report);
  EXPECT_EQ(nlohmann::json::parse(in)["corpus_size"], 10);
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"parse", "--sentence", "a"}).code, kExitUsage);
  EXPECT_EQ(run({"generate", "--n", "-3", "--out", "x"}).code, kExitUsage);
  EXPECT_EQ(run({"eval", "--model", model_, "--treebank", treebank_, "--split", "dev"}).code, kExitUsage);
}

TEST_F(Cli, HelpExitsZero) {
  const Outcome r = run({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("serve"), std::string::npos);
}

TEST_F(Cli, RuntimeErrorsExitTwo) {
  testing::TempDir scratch;
  const auto broken = scratch.write("broken.json", "{}");
  const Outcome r = run({"parse", "--model", broken.string(), "--sentence", "a b"});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_NE(r.err.find("InvalidCheckpoint"), std::string::npos);
  EXPECT_EQ(run({"parse", "--model", model_, "--sentence", "  "}).code, kExitRuntime);
  const auto bad_tree = scratch.write("bad.txt", "(W a)\n");
  EXPECT_EQ(run({"eval", "--model", model_, "--treebank", bad_tree.string()}).code, kExitRuntime);
}

TEST_F(Cli, ServeReadsModelDirFromEnvironment) {
  ::setenv("CATE_MODEL_DIR", "/nonexistent/cate-models", 1);
  const Outcome r = run({"serve", "--port", "0"});
  ::unsetenv("CATE_MODEL_DIR");
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_NE(r.err.find("/nonexistent/cate-models"), std::string::npos);
}

}  // namespace
}  // namespace cate
