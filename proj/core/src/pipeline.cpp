#include "fpo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fpo/error.hpp"
#include "fpo/parallel.hpp"

namespace fpo {

void SamplingPlan::validate() const {
  if (k < 2) throw ConfigError("sampling needs k >= 2 candidates per prompt");
  if (temperatures.empty()) throw ConfigError("sampling needs at least one temperature");
  for (double t : temperatures) {
    if (!(t > 0.0)) throw ConfigError("sampling temperatures must be positive");
  }
  if (top_k < 0) throw ConfigError("sampling top_k must be >= 0");
}

void PairBuildConfig::validate() const {
  sampling.validate();
  weights.validate();
  if (!(tau >= 0.0)) throw ConfigError("tau must be >= 0");
  if (max_prompts < 1) throw ConfigError("max_prompts must be >= 1");
}

PromptGroup sample_group(const ModelCheckpoint& policy, const TaskSpec& spec, std::span<const TokenId> text,
                         const SamplingPlan& plan, const ScoreWeights& weights,
                         const QualityPenalties& penalties, std::uint64_t seed) {
  PromptGroup g;
  g.text.assign(text.begin(), text.end());
  g.reference = reference_render(spec, text);
  g.samples.reserve(static_cast<std::size_t>(plan.k));
  for (int j = 0; j < plan.k; ++j) {
    const double temp = plan.temperatures[static_cast<std::size_t>(j) % plan.temperatures.size()];
    GenSample s = sample(policy, text, {temp, plan.top_k}, derive_seed(seed, static_cast<std::uint64_t>(j)));
    s.meta.sample_index = j;
    const CompositeScore score = composite_score(score_components(s.output, g.reference, penalties), weights);
    g.samples.push_back({std::move(s), score});
  }
  return g;
}

std::string_view outcome_name(GroupOutcome o) {
  switch (o) {
    case GroupOutcome::kSelected: return "selected";
    case GroupOutcome::kBelowTau: return "below_tau";
    case GroupOutcome::kDegenerate: return "degenerate";
  }
  throw InternalError("unknown group outcome");
}

GroupResult pair_from_group(const PromptGroup& group, const PairBuildConfig& config) {
  GroupResult r;
  r.selection = select_pair(group.samples, config.tau);
  if (!r.selection) return r;
  const ScoredSample& w = group.samples[r.selection->winner];
  const ScoredSample& l = group.samples[r.selection->loser];
  PreferencePair p = annotate_pair(group.text, group.reference, w.sample.output, l.sample.output, config.mask);
  p.score_w = w.score.s;
  p.score_l = l.score.s;
  r.outcome = p.masks.degenerate ? GroupOutcome::kDegenerate : GroupOutcome::kSelected;
  r.pair = std::move(p);
  return r;
}

namespace {

PromptGroup group_at(const ModelCheckpoint& policy, const TaskSpec& spec, const PairBuildConfig& config,
                     std::uint64_t text_seed, std::uint64_t sample_seed, std::uint64_t idx) {
  Rng rng(derive_seed(text_seed, idx));
  const TokenSeq text = random_text(spec, rng);
  return sample_group(policy, spec, text, config.sampling, config.weights, config.penalties,
                      derive_seed(sample_seed, idx));
}

}  // namespace

std::vector<PromptGroup> sample_groups(const ModelCheckpoint& policy, const TaskSpec& spec,
                                       const PairBuildConfig& config, int n, std::uint64_t seed,
                                       int jobs) {
  config.validate();
  if (n < 1) throw PreconditionError("prompt count must be >= 1");
  const std::uint64_t text_seed = derive_seed(seed, "pair_text");
  const std::uint64_t sample_seed = derive_seed(seed, "pair_sample");
  std::vector<PromptGroup> groups(static_cast<std::size_t>(n));
  parallel_for(groups.size(), jobs, [&](std::size_t i) {
    groups[i] = group_at(policy, spec, config, text_seed, sample_seed, i);
  });
  return groups;
}

PairBuildResult build_pairs(const ModelCheckpoint& policy, const TaskSpec& spec,
                            const PairBuildConfig& config, int target, std::uint64_t seed, int jobs,
                            bool keep_groups) {
  config.validate();
  if (target < 1) throw PreconditionError("pair target must be >= 1");
  const std::uint64_t text_seed = derive_seed(seed, "pair_text");
  const std::uint64_t sample_seed = derive_seed(seed, "pair_sample");
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, jobs)) * 16;

  PairBuildResult out;
  std::size_t next = 0;
  while (static_cast<int>(out.pairs.size()) < target && out.stats.prompts < config.max_prompts) {
    const std::size_t n = std::min(chunk, static_cast<std::size_t>(config.max_prompts) - next);
    std::vector<PromptGroup> groups(n);
    std::vector<GroupResult> results(n);
    parallel_for(n, jobs, [&](std::size_t i) {
      groups[i] = group_at(policy, spec, config, text_seed, sample_seed, next + i);
      results[i] = pair_from_group(groups[i], config);
    });
    // Consume in prompt order so the outcome is independent of chunking.
    for (std::size_t i = 0; i < n && static_cast<int>(out.pairs.size()) < target; ++i) {
      ++out.stats.prompts;
      switch (results[i].outcome) {
        case GroupOutcome::kSelected:
          ++out.stats.selected;
          out.pairs.push_back(*results[i].pair);
          break;
        case GroupOutcome::kBelowTau: ++out.stats.rejected_tau; break;
        case GroupOutcome::kDegenerate: ++out.stats.degenerate; break;
      }
      if (keep_groups) {
        out.groups.push_back(std::move(groups[i]));
        out.outcomes.push_back(std::move(results[i]));
      }
    }
    next += n;
  }
  return out;
}

void SweepPlan::validate() const {
  if (budgets.empty()) throw ConfigError("sweep needs at least one budget");
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    if (budgets[i] < 0) throw ConfigError("sweep budgets must be >= 0");
    if (i > 0 && budgets[i] <= budgets[i - 1]) throw ConfigError("sweep budgets must be strictly increasing");
  }
  if (methods.empty()) throw ConfigError("sweep needs at least one method");
  for (const auto& m : methods) variant_from_name(m);
  if (seeds.size() < 3) throw PreconditionError("sweep needs at least 3 seeds");
}

const SweepCell* SweepReport::cell(int budget, const std::string& method) const {
  for (const auto& c : cells) {
    if (c.budget == budget && c.method == method) return &c;
  }
  return nullptr;
}

namespace {

void mean_sd(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
}

}  // namespace

SweepReport sweep(const ModelCheckpoint& sft, const TaskSpec& spec, const PairBuildConfig& pairs,
                  const TrainConfig& train_base, const EvalSettings& eval, const SweepPlan& plan, int jobs,
                  const ProgressFn& progress) {
  plan.validate();
  pairs.validate();
  train_base.validate();
  eval.validate();
  auto note = [&](const std::string& s) {
    if (progress) progress(s);
  };

  SweepReport report;
  const int max_budget = plan.budgets.back();
  for (std::uint64_t seed : plan.seeds) {
    const std::uint64_t eval_seed = derive_seed(seed, "eval");
    PairBuildResult pool;
    if (max_budget > 0) {
      pool = build_pairs(sft, spec, pairs, max_budget, derive_seed(seed, "pairs"), jobs);
      note("seed " + std::to_string(seed) + ": " + std::to_string(pool.pairs.size()) + " pairs from " +
           std::to_string(pool.stats.prompts) + " prompts");
    }
    std::optional<EvalReport> sft_report;
    for (int budget : plan.budgets) {
      const int used = std::min<int>(budget, static_cast<int>(pool.pairs.size()));
      for (const auto& method : plan.methods) {
        SweepRow row;
        row.budget = budget;
        row.method = method;
        row.seed = seed;
        row.partial = used < budget;
        if (used == 0) {
          if (!sft_report) sft_report = eval_model(sft, spec, eval, eval_seed, jobs);
          row.report = *sft_report;
        } else {
          TrainConfig cfg = train_base;
          cfg.loss_variant = variant_from_name(method);
          cfg.seed = derive_seed(seed, "train");
          const auto data = std::span<const PreferencePair>(pool.pairs).first(static_cast<std::size_t>(used));
          const TrainResult tr = train(sft, sft, data, cfg, jobs);
          row.pairs_used = tr.pairs_used;
          row.report = eval_model(tr.model, spec, eval, eval_seed, jobs);
        }
        note("seed " + std::to_string(seed) + " budget " + std::to_string(budget) + " " + method +
             ": bad-case " + std::to_string(row.report.bad_case_ratio));
        report.rows.push_back(std::move(row));
      }
    }
  }

  for (int budget : plan.budgets) {
    for (const auto& method : plan.methods) {
      std::vector<double> bad, ter, score;
      SweepCell c;
      c.budget = budget;
      c.method = method;
      for (const auto& r : report.rows) {
        if (r.budget != budget || r.method != method) continue;
        bad.push_back(r.report.bad_case_ratio);
        ter.push_back(r.report.mean_ter);
        score.push_back(r.report.mean_score);
        c.partial = c.partial || r.partial;
      }
      c.n_seeds = static_cast<int>(bad.size());
      mean_sd(bad, c.mean_bad_case, c.sd_bad_case);
      mean_sd(ter, c.mean_ter, c.sd_ter);
      mean_sd(score, c.mean_score, c.sd_score);
      report.cells.push_back(std::move(c));
    }
  }
  return report;
}

}  // namespace fpo
