#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "fpo/model.hpp"
#include "fpo/tokens.hpp"

namespace fpo {

// Weights of the composite score. The four lambdas must sum to 1 so that s
// stays in [0, 1]; the exponent p >= 1 sharpens small metric drops.
struct ScoreWeights {
  double lambda_w = 0.25;  // intelligibility
  double lambda_m = 0.25;  // quality
  double lambda_c = 0.25;  // similarity
  double lambda_d = 0.25;  // duration
  double p = 2.0;

  void validate() const;
};

struct MetricComponents {
  double w = 0.0;
  double m = 0.0;
  double c = 0.0;
  double dur = 0.0;
};

struct CompositeScore {
  double w = 0.0;
  double m = 0.0;
  double c = 0.0;
  double dur = 0.0;
  double s = 0.0;
};

// Penalty table of the quality oracle. Each maximal SILENCE run of at least
// min_silence_run tokens, and each immediate n-gram repeat with
// min_repeat <= n <= max_repeat (not made only of SILENCE), costs its penalty.
struct QualityPenalties {
  double silence_run = 0.2;
  double repeat = 0.2;
  int min_silence_run = 2;
  int min_repeat = 2;
  int max_repeat = 5;
};

// Unit-cost Levenshtein distance.
std::size_t edit_distance(std::span<const TokenId> a, std::span<const TokenId> b);

// 1 - min(1, ED(content(hyp), content(ref)) / |content(ref)|).
double metric_intelligibility(std::span<const TokenId> hyp, std::span<const TokenId> ref);

struct AnomalyCounts {
  int silence_runs = 0;
  int repeats = 0;
  int total() const { return silence_runs + repeats; }
};
AnomalyCounts count_anomalies(std::span<const TokenId> hyp, const QualityPenalties& table = {});

// Reference-free: 1 minus the summed penalties, clamped to [0, 1].
double metric_quality(std::span<const TokenId> hyp, const QualityPenalties& table = {});

// Cosine similarity of content-token count histograms.
double metric_similarity(std::span<const TokenId> hyp, std::span<const TokenId> ref);

// 1 - min(1, | |content(hyp)| - |content(ref)| | / |content(ref)|).
double metric_duration(std::span<const TokenId> hyp, std::span<const TokenId> ref);

MetricComponents score_components(std::span<const TokenId> hyp, std::span<const TokenId> ref,
                                  const QualityPenalties& table = {});

CompositeScore composite_score(const MetricComponents& components, const ScoreWeights& weights);

struct ScoredSample {
  GenSample sample;
  CompositeScore score;
};

struct PairSelection {
  std::size_t winner = 0;
  std::size_t loser = 0;
};

// Gaps within this of tau count as equal to it, so decimal scores such as
// 0.4 - 0.1 are not selected at tau = 0.3 by rounding alone.
inline constexpr double kSelectionSlack = 1e-12;

// Winner is the highest s, loser the lowest (ties go to the earliest index);
// the pair is returned only if s(winner) - s(loser) > tau.
std::optional<PairSelection> select_pair(std::span<const ScoredSample> samples, double tau);
std::optional<PairSelection> select_pair(std::span<const double> scores, double tau);

}  // namespace fpo
