#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpo/evalrep.hpp"
#include "fpo/model.hpp"
#include "fpo/optimloss.hpp"
#include "fpo/pipeline.hpp"
#include "fpo/task.hpp"

namespace fpo {

inline constexpr int kConfigSchemaVersion = 1;

// Everything one experiment needs, read from a single flat JSON object.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "runs/default";

  // Task world.
  int text_vocab = 4;
  int min_words = 2;
  int max_text_len = 4;
  double pause_prob = 0.3;
  std::uint64_t task_seed = 7;
  InjectionConfig injection;

  // Corruption of the SFT targets.
  double corruption_rate = 0.2;
  std::vector<ErrorKind> corruption_kinds{kAllErrorKinds.begin(), kAllErrorKinds.end()};
  int hard_words = 1;  // 0 places errors anywhere
  std::uint64_t hard_word_seed = 11;

  ModelConfig model{32, 48, 40, Architecture::kElmanTanh};

  int sft_examples = 4000;
  TrainConfig sft;

  // Preference data.
  int prompts = 500;  // prompts sampled by the sample command
  PairBuildConfig pairs;

  // Preference training; the loss variant is chosen per command.
  TrainConfig train;
  // Pairs used per preference run; 0 uses every pair.
  int pair_budget = 0;

  EvalSettings eval;
  SweepPlan sweep;

  ExperimentConfig();

  void validate() const;

  // Canonical JSON with every key present.
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);

  // FNV-1a over the canonical dump, excluding out_dir.
  std::uint64_t hash() const;

  TaskSpec task() const;
  CorruptionProfile corruption(const TaskSpec& spec) const;
};

// Reads a config file, then applies FPO_SEED and FPO_OUT_DIR.
ExperimentConfig load_config(const std::string& path);
void apply_env_overrides(ExperimentConfig& cfg);

std::string hash_hex(std::uint64_t h);
std::uint64_t parse_hash_hex(std::string_view s);

// Per-stage seeds, all derived from the global seed.
namespace stage {
inline constexpr std::string_view kSftData = "sft_data";
inline constexpr std::string_view kCorrupt = "corrupt";
inline constexpr std::string_view kInit = "init";
inline constexpr std::string_view kSftTrain = "sft_train";
inline constexpr std::string_view kSample = "sample";
inline constexpr std::string_view kPairs = "pairs";
inline constexpr std::string_view kTrain = "train";
inline constexpr std::string_view kEval = "eval";
}  // namespace stage

std::uint64_t stage_seed(const ExperimentConfig& cfg, std::string_view stage);

}  // namespace fpo
