#include <gtest/gtest.h>

#include <unistd.h>

#include "support/cli.hpp"

namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  fs::path dir;
  std::string config;
  std::string log;

  void SetUp() override {
    dir = fs::temp_directory_path() / ("fpo_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    config = (dir / "cfg.json").string();
    log = (dir / "log.txt").string();
    cli::write_config(config, cli::tiny_config((dir / "out").string()));
  }
  void TearDown() override { fs::remove_all(dir); }

  int fpo(const std::string& args) { return cli::run(args, log); }
};

}  // namespace

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(fpo(""), 1);
  EXPECT_EQ(fpo("frobnicate"), 1);
  EXPECT_EQ(fpo("gen-sft"), 1);
  EXPECT_EQ(fpo("--help"), 0);
  EXPECT_EQ(fpo("default-config"), 0);
}

TEST_F(CliTest, ConfigErrors) {
  nlohmann::json j = cli::tiny_config((dir / "out").string());
  j["bogus_key"] = 1;
  cli::write_config(config, j);
  EXPECT_EQ(fpo("gen-sft -c '" + config + "'"), 2);
  j.erase("bogus_key");
  j["k"] = 1;
  cli::write_config(config, j);
  EXPECT_EQ(fpo("gen-sft -c '" + config + "'"), 2);
  EXPECT_EQ(fpo("gen-sft -c '" + (dir / "missing.json").string() + "'"), 3);
}

TEST_F(CliTest, MissingInputs) {
  const std::string c = " -c '" + config + "'";
  EXPECT_EQ(fpo("train-sft" + c), 3);
  EXPECT_EQ(fpo("train fpo" + c), 3);
  EXPECT_EQ(fpo("eval" + c), 3);
}

TEST_F(CliTest, FullRunProducesArtifactsAndRejectsStaleInputs) {
  const std::string c = " -c '" + config + "'";
  for (const std::string& cmd : cli::pipeline_commands()) ASSERT_EQ(fpo(cmd + c), 0) << cmd << "\n" << cli::slurp(log);
  const fs::path out = dir / "out";
  for (const char* f : {"sft.jsonl", "sft.ckpt", "sft_loss.csv", "samples.jsonl", "pairs.jsonl", "pairs_summary.json",
                        "fpo.ckpt", "fpo_loss.csv", "dpo.ckpt", "dpo_loss.csv", "eval.csv", "comparison.csv",
                        "comparison.txt", "eval_summary.json", "sweep_rows.csv", "sweep_cells.csv",
                        "sweep_summary.json", "gradcheck.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_EQ(cli::slurp(out / "eval.csv").rfind("# schema_version=1 config_hash=", 0), 0u);
  EXPECT_EQ(fpo("train bogus" + c), 2);

  // A changed seed changes the config hash, so the old artifacts no longer fit.
  EXPECT_EQ(cli::run("train fpo" + c, log, "FPO_SEED=77"), 3);
}
