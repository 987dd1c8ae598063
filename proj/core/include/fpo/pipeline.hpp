#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fpo/annotate.hpp"
#include "fpo/evalrep.hpp"
#include "fpo/optimloss.hpp"
#include "fpo/scoring.hpp"
#include "fpo/task.hpp"

namespace fpo {

// k candidates per prompt, spread round-robin over the temperature list.
struct SamplingPlan {
  int k = 8;
  std::vector<double> temperatures{1.0};
  int top_k = 0;

  void validate() const;
};

struct PromptGroup {
  TokenSeq text;
  TokenSeq reference;
  std::vector<ScoredSample> samples;
};

PromptGroup sample_group(const ModelCheckpoint& policy, const TaskSpec& spec, std::span<const TokenId> text,
                         const SamplingPlan& plan, const ScoreWeights& weights,
                         const QualityPenalties& penalties, std::uint64_t seed);

struct PairBuildConfig {
  SamplingPlan sampling;
  ScoreWeights weights;
  QualityPenalties penalties;
  double tau = 0.3;
  MaskPolicy mask;
  // Give up after this many prompts even if the target is not reached.
  int max_prompts = 20000;

  void validate() const;
};

enum class GroupOutcome : std::uint8_t { kSelected, kBelowTau, kDegenerate };

std::string_view outcome_name(GroupOutcome o);

struct GroupResult {
  GroupOutcome outcome = GroupOutcome::kBelowTau;
  std::optional<PairSelection> selection;
  std::optional<PreferencePair> pair;  // set for kSelected and kDegenerate
};

GroupResult pair_from_group(const PromptGroup& group, const PairBuildConfig& config);

struct PairBuildStats {
  int prompts = 0;
  int selected = 0;
  int rejected_tau = 0;
  int degenerate = 0;
};

struct PairBuildResult {
  std::vector<PreferencePair> pairs;  // non-degenerate, in prompt order
  PairBuildStats stats;
  std::vector<PromptGroup> groups;    // only when keep_groups
  std::vector<GroupResult> outcomes;  // parallel to groups
};

// Scores k candidates for each of the first n prompts of the stream that
// build_pairs draws from the same seed.
std::vector<PromptGroup> sample_groups(const ModelCheckpoint& policy, const TaskSpec& spec,
                                       const PairBuildConfig& config, int n, std::uint64_t seed,
                                       int jobs = 1);

// Samples prompts from `policy` until `target` usable pairs are collected or
// max_prompts is exhausted. The result depends only on the seed, not on jobs.
PairBuildResult build_pairs(const ModelCheckpoint& policy, const TaskSpec& spec,
                            const PairBuildConfig& config, int target, std::uint64_t seed, int jobs = 1,
                            bool keep_groups = false);

struct SweepPlan {
  std::vector<int> budgets{50, 100, 200, 400};
  std::vector<std::string> methods{"dpo", "fpo"};
  std::vector<std::uint64_t> seeds{1, 2, 3};

  void validate() const;
};

struct SweepRow {
  int budget = 0;
  std::string method;
  std::uint64_t seed = 0;
  int pairs_used = 0;
  bool partial = false;
  EvalReport report;
};

struct SweepCell {
  int budget = 0;
  std::string method;
  int n_seeds = 0;
  double mean_bad_case = 0.0;
  double sd_bad_case = 0.0;
  double mean_ter = 0.0;
  double sd_ter = 0.0;
  double mean_score = 0.0;
  double sd_score = 0.0;
  bool partial = false;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<SweepCell> cells;  // ordered by budget, then method

  const SweepCell* cell(int budget, const std::string& method) const;
};

using ProgressFn = std::function<void(const std::string&)>;

// For each seed, one pool of pairs is built at the largest budget and every
// budget trains on its prefix. All methods of a seed share the evaluation
// seed. Budget 0 evaluates the SFT model.
SweepReport sweep(const ModelCheckpoint& sft, const TaskSpec& spec, const PairBuildConfig& pairs,
                  const TrainConfig& train_base, const EvalSettings& eval, const SweepPlan& plan,
                  int jobs = 1, const ProgressFn& progress = {});

}  // namespace fpo
