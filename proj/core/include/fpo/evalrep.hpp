#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fpo/model.hpp"
#include "fpo/scoring.hpp"
#include "fpo/task.hpp"

namespace fpo {

struct EvalSettings {
  int n = 300;
  double temperature = 1.0;
  int top_k = 0;
  // A sample is a bad case if TER > ter_threshold or quality < quality_threshold.
  double ter_threshold = 0.05;
  double quality_threshold = 0.6;
  ScoreWeights weights;
  QualityPenalties penalties;

  void validate() const;
};

bool is_bad_case(double ter, double quality, const EvalSettings& settings);

// Fraction of (ter, quality) samples that are bad cases.
double bad_case_ratio(std::span<const double> ters, std::span<const double> qualities,
                      const EvalSettings& settings);

struct EvalReport {
  int n_samples = 0;
  double mean_ter = 0.0;
  double bad_case_ratio = 0.0;
  int n_bad = 0;
  double mean_score = 0.0;
  double mean_quality = 0.0;
  // Samples containing at least one detected span of each kind (indexed by
  // ErrorKind); n_clean + n_with_errors == n_samples.
  std::array<int, kAllErrorKinds.size()> kind_counts{};
  int n_with_errors = 0;
  int n_clean = 0;
  int n_truncated = 0;  // generations that hit the length budget
  std::uint64_t seed = 0;
  EvalSettings settings;
};

// Produces the output for one text; must be deterministic in (text, seed).
using Generator = std::function<GenSample(std::span<const TokenId> text, std::uint64_t seed)>;

EvalReport eval_generator(const Generator& generate, const TaskSpec& spec,
                          const EvalSettings& settings, std::uint64_t seed, int jobs = 1);

// Samples settings.n fresh texts and decodes them with the fixed settings.
EvalReport eval_model(const ModelCheckpoint& ckpt, const TaskSpec& spec,
                      const EvalSettings& settings, std::uint64_t seed, int jobs = 1);

struct ComparisonRow {
  std::string method;
  double mean_ter = 0.0;
  double bad_case_ratio = 0.0;
  double mean_score = 0.0;
  // Percentage change against the base method; empty when the base value is
  // zero and the method's is not.
  std::optional<double> ter_delta_pct;
  std::optional<double> bad_case_delta_pct;
  std::optional<double> score_delta_pct;
};

struct ComparisonTable {
  std::string base;
  std::vector<ComparisonRow> rows;  // sorted by method name

  std::string to_text() const;
  std::string to_csv() const;
};

// Throws ProtocolError unless every report used the same evaluation seed.
ComparisonTable compare(const std::map<std::string, EvalReport>& reports, const std::string& base);

std::optional<double> percent_delta(double base, double value);

}  // namespace fpo
