#include "fpo/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "fpo/error.hpp"

namespace fpo {

void ScoreWeights::validate() const {
  for (double l : {lambda_w, lambda_m, lambda_c, lambda_d}) {
    if (!(l >= 0.0)) throw ConfigError("score weights must be nonnegative");
  }
  if (std::abs(lambda_w + lambda_m + lambda_c + lambda_d - 1.0) > 1e-9) {
    throw ConfigError("score weights must sum to 1");
  }
  if (!(p >= 1.0) || !std::isfinite(p)) throw ConfigError("score exponent p must be >= 1");
}

std::size_t edit_distance(std::span<const TokenId> a, std::span<const TokenId> b) {
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0u : 1u)});
      diag = up;
    }
  }
  return row[b.size()];
}

double metric_intelligibility(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  const TokenSeq h = content_of(hyp);
  const TokenSeq r = content_of(ref);
  if (r.empty()) return h.empty() ? 1.0 : 0.0;
  const double ratio = static_cast<double>(edit_distance(h, r)) / static_cast<double>(r.size());
  return 1.0 - std::min(1.0, ratio);
}

AnomalyCounts count_anomalies(std::span<const TokenId> hyp, const QualityPenalties& table) {
  const TokenSeq seq = content_of(hyp);
  AnomalyCounts counts;
  for (std::size_t i = 0; i < seq.size();) {
    if (seq[i] != kSilence) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < seq.size() && seq[j] == kSilence) ++j;
    if (static_cast<int>(j - i) >= table.min_silence_run) ++counts.silence_runs;
    i = j;
  }
  for (std::size_t i = 0; i < seq.size();) {
    std::size_t hit = 0;
    for (int n = table.min_repeat; n <= table.max_repeat; ++n) {
      const auto len = static_cast<std::size_t>(n);
      if (i + 2 * len > seq.size()) break;
      const auto first = seq.begin() + static_cast<std::ptrdiff_t>(i);
      const auto second = first + static_cast<std::ptrdiff_t>(len);
      const bool all_silence = std::all_of(first, second, [](TokenId t) { return t == kSilence; });
      if (!all_silence && std::equal(first, second, second)) {
        hit = len;
        break;
      }
    }
    if (hit) {
      ++counts.repeats;
      i += 2 * hit;
    } else {
      ++i;
    }
  }
  return counts;
}

double metric_quality(std::span<const TokenId> hyp, const QualityPenalties& table) {
  const AnomalyCounts a = count_anomalies(hyp, table);
  const double q = 1.0 - a.silence_runs * table.silence_run - a.repeats * table.repeat;
  return std::clamp(q, 0.0, 1.0);
}

double metric_similarity(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  std::map<TokenId, double> h, r;
  for (TokenId t : content_of(hyp)) h[t] += 1.0;
  for (TokenId t : content_of(ref)) r[t] += 1.0;
  if (h.empty() && r.empty()) return 1.0;
  if (h.empty() || r.empty()) return 0.0;
  double dot = 0.0, nh = 0.0, nr = 0.0;
  for (const auto& [t, c] : h) {
    nh += c * c;
    if (auto it = r.find(t); it != r.end()) dot += c * it->second;
  }
  for (const auto& [t, c] : r) nr += c * c;
  return std::clamp(dot / std::sqrt(nh * nr), 0.0, 1.0);
}

double metric_duration(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  const auto lh = static_cast<double>(content_of(hyp).size());
  const auto lr = static_cast<double>(content_of(ref).size());
  if (lr == 0.0) return lh == 0.0 ? 1.0 : 0.0;
  return 1.0 - std::min(1.0, std::abs(lh - lr) / lr);
}

MetricComponents score_components(std::span<const TokenId> hyp, std::span<const TokenId> ref,
                                  const QualityPenalties& table) {
  return {metric_intelligibility(hyp, ref), metric_quality(hyp, table),
          metric_similarity(hyp, ref), metric_duration(hyp, ref)};
}

CompositeScore composite_score(const MetricComponents& c, const ScoreWeights& weights) {
  weights.validate();
  for (double v : {c.w, c.m, c.c, c.dur}) {
    if (!(v >= 0.0 && v <= 1.0)) throw PreconditionError("metric components must lie in [0, 1]");
  }
  const double p = weights.p;
  const double s = weights.lambda_w * std::pow(c.w, p) + weights.lambda_m * std::pow(c.m, p) +
                   weights.lambda_c * std::pow(c.c, p) + weights.lambda_d * std::pow(c.dur, p);
  return {c.w, c.m, c.c, c.dur, std::clamp(s, 0.0, 1.0)};
}

std::optional<PairSelection> select_pair(std::span<const double> scores, double tau) {
  if (scores.size() < 2) throw PreconditionError("pair selection needs at least two samples");
  PairSelection sel;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[sel.winner]) sel.winner = i;
    if (scores[i] < scores[sel.loser]) sel.loser = i;
  }
  if (scores[sel.winner] - scores[sel.loser] > tau + kSelectionSlack) return sel;
  return std::nullopt;
}

std::optional<PairSelection> select_pair(std::span<const ScoredSample> samples, double tau) {
  std::vector<double> scores;
  scores.reserve(samples.size());
  for (const auto& s : samples) scores.push_back(s.score.s);
  return select_pair(scores, tau);
}

}  // namespace fpo
