#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fpo/config.hpp"

namespace fpo {

// The stages of one experiment, each seeded from the config's global seed.

std::vector<SftExample> build_sft_data(const ExperimentConfig& cfg);

TrainResult train_sft_model(const ExperimentConfig& cfg, std::span<const SftExample> data, int jobs = 1);

// cfg.train with the given loss variant and the stage seed filled in.
TrainConfig preference_config(const ExperimentConfig& cfg, LossVariant variant);

PairBuildResult build_preference_pairs(const ExperimentConfig& cfg, const ModelCheckpoint& sft, int target,
                                       int jobs = 1);

EvalReport evaluate(const ExperimentConfig& cfg, const ModelCheckpoint& model, int jobs = 1);

struct EndToEndResult {
  ModelCheckpoint sft_model;
  EvalReport sft;
  std::map<std::string, EvalReport> methods;  // keyed by loss variant name
  PairBuildStats pair_stats;
  int pairs = 0;
};

// SFT on corrupted data, one shared pair set, then every listed variant
// trained from the SFT checkpoint and evaluated on the same texts.
EndToEndResult run_end_to_end(const ExperimentConfig& cfg, int pair_target,
                              const std::vector<LossVariant>& variants, int jobs = 1);

}  // namespace fpo
