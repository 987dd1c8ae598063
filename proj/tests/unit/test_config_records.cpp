#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "fpo/config.hpp"
#include "fpo/error.hpp"
#include "fpo/records.hpp"

using namespace fpo;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("fpo_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
  static inline int counter_ = 0;
};

void write_json(const std::string& path, const nlohmann::json& j) { std::ofstream(path) << j.dump(2); }

}  // namespace

TEST(Config, JsonRoundTrip) {
  ExperimentConfig cfg;
  cfg.seed = 99;
  cfg.train.beta = 0.25;
  cfg.pairs.sampling.temperatures = {0.8, 1.2};
  cfg.corruption_kinds = {ErrorKind::kRepetition};
  const ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
  EXPECT_EQ(back.hash(), cfg.hash());
}

TEST(Config, DefaultsValidate) {
  const ExperimentConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.to_json().at("schema_version"), 1);
}

TEST(Config, RejectsUnknownKeysAndSchemaMismatch) {
  nlohmann::json j = ExperimentConfig().to_json();
  j["learning_rat"] = 0.1;
  EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
  j = ExperimentConfig().to_json();
  j["schema_version"] = 2;
  EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
  j = ExperimentConfig().to_json();
  j["k"] = "eight";
  EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
}

TEST(Config, RejectsInvalidValues) {
  for (const auto& [key, value] : std::vector<std::pair<std::string, nlohmann::json>>{
           {"k", 1}, {"beta", 0.0}, {"train_batch_size", 0}, {"tau", -0.1}, {"length_policy", "nearest"}}) {
    nlohmann::json j = ExperimentConfig().to_json();
    j[key] = value;
    EXPECT_THROW(ExperimentConfig::from_json(j).validate(), ConfigError) << key;
  }
}

TEST(Config, HashIgnoresOutDir) {
  ExperimentConfig a, b;
  b.out_dir = "/elsewhere";
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = a.seed + 1;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(parse_hash_hex(hash_hex(a.hash())), a.hash());
  EXPECT_EQ(hash_hex(0xabcULL), "0000000000000abc");
  EXPECT_THROW(parse_hash_hex("xyz"), InputError);
}

TEST(Config, LoadAppliesEnvironmentOverrides) {
  TempDir dir;
  const std::string path = dir.file("cfg.json");
  write_json(path, ExperimentConfig().to_json());
  ::setenv("FPO_SEED", "1234", 1);
  ::setenv("FPO_OUT_DIR", "/tmp/fpo_env_out", 1);
  const ExperimentConfig cfg = load_config(path);
  ::unsetenv("FPO_SEED");
  ::unsetenv("FPO_OUT_DIR");
  EXPECT_EQ(cfg.seed, 1234u);
  EXPECT_EQ(cfg.out_dir, "/tmp/fpo_env_out");
  EXPECT_EQ(load_config(path).seed, ExperimentConfig().seed);
  EXPECT_THROW(load_config(dir.file("missing.json")), InputError);
}

TEST(Config, StageSeedsDiffer) {
  const ExperimentConfig cfg;
  EXPECT_NE(stage_seed(cfg, stage::kPairs), stage_seed(cfg, stage::kTrain));
  EXPECT_EQ(stage_seed(cfg, stage::kEval), derive_seed(cfg.seed, "eval"));
}

TEST(Records, SpanAndPairRoundTrip) {
  PreferencePair p = annotate_pair(TokenSeq{28, 29}, TokenSeq{5, 6, 7, kEos}, TokenSeq{5, 6, 7, kEos},
                                   TokenSeq{5, 6, 5, 6, 7, kEos});
  p.score_w = 0.9;
  p.score_l = 0.4;
  const PreferencePair back = pair_from_json(to_json(p));
  EXPECT_EQ(back.condition, p.condition);
  EXPECT_EQ(back.winner, p.winner);
  EXPECT_EQ(back.loser, p.loser);
  EXPECT_EQ(back.spans_l, p.spans_l);
  EXPECT_EQ(back.masks.winner, p.masks.winner);
  EXPECT_EQ(back.masks.loser, p.masks.loser);
  EXPECT_EQ(back.score_w, 0.9);

  nlohmann::json bad = to_json(p);
  bad["mask_l"] = "01";
  EXPECT_THROW(pair_from_json(bad), InputError);

  const ErrorSpan s{2, 4, ErrorKind::kAbnormalSilence};
  EXPECT_EQ(span_from_json(to_json(s)), s);
}

TEST(Records, FileHeaderIsChecked) {
  TempDir dir;
  const std::string path = dir.file("sft.jsonl");
  SftExample ex{TokenSeq{28, 29}, TokenSeq{5, 3, 6, kEos}, {{1, 2, ErrorKind::kUnnaturalPause}}};
  write_records(path, format::kSft, 42, {to_json(ex)});
  const auto recs = read_records(path, format::kSft, 42);
  ASSERT_EQ(recs.size(), 1u);
  const SftExample back = sft_from_json(recs[0]);
  EXPECT_EQ(back.target, ex.target);
  EXPECT_EQ(back.spans, ex.spans);
  EXPECT_NO_THROW(read_records(path, format::kSft, std::nullopt));
  EXPECT_THROW(read_records(path, format::kSft, 43), InputError);
  EXPECT_THROW(read_records(path, format::kPairs, 42), InputError);
  EXPECT_THROW(read_records(dir.file("none.jsonl"), format::kSft, 42), InputError);
}

TEST(Records, CsvHelpers) {
  EXPECT_EQ(csv_preamble(0x1f), "# schema_version=1 config_hash=000000000000001f\n");
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
  const std::string csv = loss_log_csv({{1, 0, "dpo_utterance", 0.5, 2.0}}, 7);
  EXPECT_EQ(csv, csv_preamble(7) + "step,epoch,variant,loss,grad_norm\n1,0,dpo_utterance,0.5,2\n");
}
