// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion names
// as arguments to run a subset; --jobs N sets worker threads.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fpo/experiment.hpp"
#include "fpo/pipeline.hpp"
#include "fpo/scoring.hpp"
#include "support/cli.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/roundtrip.hpp"

using namespace fpo;
namespace fs = std::filesystem;

namespace {

// Tolerances and thresholds.
constexpr double kGradStep = 1e-5;
constexpr double kGradTolerance = 1e-4;
constexpr double kRelErrorFloor = 1e-5;
constexpr int kGradInstances = 20;
constexpr double kIdentityTolerance = 1e-9;
constexpr int kMaskTrials = 1000;
constexpr double kKindAccuracy = 0.95;
constexpr double kBoundaryAccuracy = 0.95;
constexpr int kAlignAlphabet = 4;
constexpr int kAlignMaxLen = 6;
constexpr int kScorerTuples = 100000;
constexpr double kGridTau = 0.3;
constexpr int kPairTarget = 300;
constexpr int kMinPairs = 200;
constexpr double kSftBadLow = 0.10;
constexpr double kSftBadHigh = 0.20;
constexpr double kMinRelativeImprovement = 0.30;
constexpr int kFpoBeatsDpoSeeds = 2;
constexpr int kFpoBeatsDpoCells = 3;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

// Runtime budgets in seconds.
constexpr double kGradBudget = 60;
constexpr double kMaskBudget = 120;
constexpr double kAlignBudget = 60;
constexpr double kEndToEndBudget = 600;
constexpr double kSweepBudget = 1800;

int g_jobs = 1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), kRelErrorFloor});
}

// Central differences of `f` over every coordinate of `params`.
template <class F>
double worst_fd_error(std::vector<double> params, const std::vector<double>& analytic, F&& f) {
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double x = params[k];
    params[k] = x + kGradStep;
    const double up = f(params);
    params[k] = x - kGradStep;
    const double down = f(params);
    params[k] = x;
    worst = std::max(worst, rel_error(analytic[k], (up - down) / (2.0 * kGradStep)));
  }
  return worst;
}

Outcome gradient_suite() {
  const LossVariant variants[] = {LossVariant::kDpoUtterance, LossVariant::kFpoTokenSigmoid,
                                  LossVariant::kFpoSequenceSigmoid};
  double worst_ll = 0.0, worst[3] = {0, 0, 0};
  for (int i = 0; i < kGradInstances; ++i) {
    const auto pairs = fixtures::make_pairs(1, 1000 + static_cast<std::uint64_t>(i));
    const ModelCheckpoint theta = init_model(fixtures::kSmall, 2000 + static_cast<std::uint64_t>(i));
    const ModelCheckpoint ref = init_model(fixtures::kSmall, 3000 + static_cast<std::uint64_t>(i));
    const PreferencePair& p = pairs[0];
    ModelCheckpoint probe = theta;

    const auto g = grad_loglik(theta, p.condition, p.winner);
    worst_ll = std::max(worst_ll, worst_fd_error(theta.params, g, [&](const std::vector<double>& x) {
                          probe.params = x;
                          double s = 0.0;
                          for (double v : oracle::elman_logprobs(probe, p.condition, p.winner)) s += v;
                          return s;
                        }));

    const std::vector<PairBatchItem> batch{prepare_item(p, ref, LengthPolicy::kAligned)};
    for (int v = 0; v < 3; ++v) {
      TrainConfig cfg;
      cfg.loss_variant = variants[v];
      cfg.beta = 0.5;
      const BatchLoss bl = preference_loss(theta, batch, cfg);
      worst[v] = std::max(worst[v], worst_fd_error(theta.params, bl.grad, [&](const std::vector<double>& x) {
                            probe.params = x;
                            return oracle::preference_loss(probe, ref, batch, variants[v], cfg.beta);
                          }));
    }
  }
  const double all = std::max({worst_ll, worst[0], worst[1], worst[2]});
  return {all < kGradTolerance,
          fmt("max rel err loglik %.2e dpo %.2e fpo_token %.2e fpo_sequence %.2e (%d instances, all %zu coords, "
              "h=%g, tol %g)",
              worst_ll, worst[0], worst[1], worst[2], kGradInstances, fixtures::kSmall.param_count(), kGradStep,
              kGradTolerance)};
}

PreferencePair swapped(const PreferencePair& p) {
  PreferencePair s = p;
  std::swap(s.winner, s.loser);
  std::swap(s.masks.winner, s.masks.loser);
  return s;
}

Outcome loss_identities() {
  int failures = 0;
  double worst_log2 = 0.0, worst_swap = 0.0;
  TrainConfig dpo;
  dpo.loss_variant = LossVariant::kDpoUtterance;
  TrainConfig seq;
  seq.loss_variant = LossVariant::kFpoSequenceSigmoid;
  TrainConfig tok;
  tok.loss_variant = LossVariant::kFpoTokenSigmoid;
  for (int i = 0; i < 50; ++i) {
    const auto pairs = fixtures::make_pairs(4, 500 + static_cast<std::uint64_t>(i));
    const ModelCheckpoint theta = init_model(fixtures::kSmall, 600 + static_cast<std::uint64_t>(i));
    const ModelCheckpoint ref = init_model(fixtures::kSmall, 700 + static_cast<std::uint64_t>(i));
    dpo.beta = seq.beta = tok.beta = 0.05 + 0.1 * (i % 10);

    std::vector<PairBatchItem> at_ref;
    for (const auto& p : pairs) at_ref.push_back(prepare_item(p, theta, LengthPolicy::kAligned));
    worst_log2 = std::max(worst_log2, std::abs(dpo_loss(theta, at_ref, dpo).loss - std::log(2.0)));

    std::vector<PreferencePair> full = pairs;
    for (auto& p : full) {
      p.masks.winner.set_range(0, p.winner.size());
      p.masks.loser.set_range(0, p.loser.size());
    }
    std::vector<PairBatchItem> full_items;
    for (const auto& p : full) full_items.push_back(prepare_item(p, ref, LengthPolicy::kAligned));
    const BatchLoss a = fpo_loss(theta, full_items, seq);
    const BatchLoss b = dpo_loss(theta, full_items, dpo);
    if (a.loss != b.loss || a.grad != b.grad) ++failures;

    PreferencePair zero = pairs[1];
    zero.masks = PairMasks{IndicatorMask(zero.winner.size()), IndicatorMask(zero.loser.size()), true};
    const std::vector<PairBatchItem> one{prepare_item(pairs[0], ref, LengthPolicy::kAligned)};
    const std::vector<PairBatchItem> with_zero{one[0], prepare_item(zero, ref, LengthPolicy::kAligned)};
    for (const TrainConfig* c : {&seq, &tok}) {
      const BatchLoss l1 = fpo_loss(theta, one, *c);
      const BatchLoss l2 = fpo_loss(theta, with_zero, *c);
      if (2.0 * l2.loss != l1.loss) ++failures;
      for (std::size_t k = 0; k < l1.grad.size(); ++k) {
        if (2.0 * l2.grad[k] != l1.grad[k]) {
          ++failures;
          break;
        }
      }
    }

    for (const auto& p : pairs) {
      const PreferencePair s = swapped(p);
      const std::vector<PairBatchItem> fwd{prepare_item(p, ref, LengthPolicy::kAligned)};
      const std::vector<PairBatchItem> back{prepare_item(s, ref, LengthPolicy::kAligned)};
      const double l = dpo_loss(theta, fwd, dpo).loss;
      const double lp = dpo_loss(theta, back, dpo).loss;
      worst_swap = std::max(worst_swap, std::abs(std::exp(-l) + std::exp(-lp) - 1.0));
    }
  }
  const bool ok = failures == 0 && worst_log2 <= kIdentityTolerance && worst_swap <= kIdentityTolerance;
  return {ok, fmt("|dpo-log2| max %.1e, swap residual max %.1e (tol %g), bit-exact reduction/zero-mask failures %d",
                  worst_log2, worst_swap, kIdentityTolerance, failures)};
}

// Expected loser mask: temporal spans as intervals, semantic-phonetic spans
// as a suffix from the earliest onset.
IndicatorMask expected_mask(std::size_t n, const std::vector<ErrorSpan>& spans) {
  IndicatorMask m(n);
  for (const ErrorSpan& s : spans) {
    if (s.category() == ErrorCategory::kTemporal) {
      for (std::size_t i = s.start; i < s.end; ++i) m.set(i);
    } else {
      for (std::size_t i = s.start; i < n; ++i) m.set(i);
    }
  }
  return m;
}

Outcome mask_policy() {
  const TaskSpec spec = ExperimentConfig{}.task();
  bool ok = true;
  int shape_failures = 0;
  std::ostringstream detail;
  for (ErrorKind kind : kAllErrorKinds) {
    const roundtrip::Tally t = roundtrip::run(spec, kind, kMaskTrials, 40 + static_cast<std::uint64_t>(kind));
    Rng rng(90 + static_cast<std::uint64_t>(kind));
    for (int i = 0; i < kMaskTrials; ++i) {
      const CorruptedSample c = roundtrip::draw(spec, kind, rng);
      const PreferencePair p = annotate_pair(TokenSeq{}, c.clean, c.clean, c.corrupted);
      if (p.masks.loser != expected_mask(p.loser.size(), p.spans_l)) ++shape_failures;
    }
    ok = ok && t.kind_accuracy() >= kKindAccuracy && t.boundary_accuracy() >= kBoundaryAccuracy;
    detail << kind_name(kind) << " kind " << fmt("%.3f", t.kind_accuracy()) << " bound "
           << fmt("%.3f", t.boundary_accuracy()) << "; ";
  }
  detail << "shape failures " << shape_failures << " (" << kMaskTrials << " pairs/kind, need >= " << kKindAccuracy
         << ")";
  return {ok && shape_failures == 0, detail.str()};
}

Outcome alignment_oracle() {
  const auto seqs = oracle::all_sequences(kAlignAlphabet, kAlignMaxLen);
  const oracle::EditGraph graph(seqs, kAlignAlphabet, 4);
  long checked = 0, mismatches = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto dist = graph.distances_from(static_cast<int>(i));
    for (std::size_t j = 0; j < seqs.size(); ++j) {
      const AlignmentOps ops = align(seqs[i], seqs[j]);
      if (ops.cost() != static_cast<std::size_t>(dist[j]) || ops.replay(seqs[i], seqs[j]) != seqs[j]) ++mismatches;
      ++checked;
    }
  }
  return {mismatches == 0, fmt("%ld pairs over %zu sequences (len <= %d, %d symbols), %ld mismatches", checked,
                               seqs.size(), kAlignMaxLen, kAlignAlphabet, mismatches)};
}

Outcome scorer_suite() {
  Rng rng(77);
  int range_failures = 0, monotone_failures = 0;
  for (int i = 0; i < kScorerTuples; ++i) {
    double l[4], sum = 0.0;
    for (double& x : l) sum += (x = uniform01(rng));
    for (double& x : l) x /= sum;
    const ScoreWeights w{l[0], l[1], l[2], l[3], 1.0 + 3.0 * uniform01(rng)};
    MetricComponents c{uniform01(rng), uniform01(rng), uniform01(rng), uniform01(rng)};
    const double s = composite_score(c, w).s;
    if (!(s >= 0.0 && s <= 1.0)) ++range_failures;
    MetricComponents up = c;
    double* comp[] = {&up.w, &up.m, &up.c, &up.dur};
    double& x = *comp[i % 4];
    x = std::min(1.0, x + uniform01(rng));
    if (composite_score(up, w).s < s) ++monotone_failures;
  }

  // Scores on a 0.1 grid are integers in tenths; the integer oracle decides
  // selection exactly.
  int grid_failures = 0, grid_cases = 0;
  const int tau_tenths = static_cast<int>(std::lround(kGridTau * 10));
  for (int a = 0; a <= 10; ++a) {
    for (int b = 0; b <= 10; ++b) {
      for (int c = 0; c <= 10; ++c) {
        const int t[3] = {a, b, c};
        int hi = 0, lo = 0;
        for (int k = 1; k < 3; ++k) {
          if (t[k] > t[hi]) hi = k;
          if (t[k] < t[lo]) lo = k;
        }
        const bool want = t[hi] - t[lo] > tau_tenths;
        const std::vector<double> scores{a / 10.0, b / 10.0, c / 10.0};
        const auto got = select_pair(scores, kGridTau);
        ++grid_cases;
        if (got.has_value() != want) {
          ++grid_failures;
        } else if (got && (static_cast<int>(got->winner) != hi || static_cast<int>(got->loser) != lo)) {
          ++grid_failures;
        }
      }
    }
  }
  const bool ok = range_failures == 0 && monotone_failures == 0 && grid_failures == 0;
  return {ok, fmt("%d tuples: %d out of range, %d monotonicity violations; grid %d cases at tau=%g: %d failures",
                  kScorerTuples, range_failures, monotone_failures, grid_cases, kGridTau, grid_failures)};
}

ModelCheckpoint g_seed1_sft;
bool g_have_seed1_sft = false;

Outcome end_to_end() {
  double sum_sft = 0.0, sum_fpo = 0.0;
  int fpo_wins = 0;
  bool sft_in_band = true, enough_pairs = true;
  std::ostringstream detail;
  for (std::uint64_t seed : kSeeds) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    const EndToEndResult r =
        run_end_to_end(cfg, kPairTarget, {LossVariant::kFpoTokenSigmoid, LossVariant::kDpoUtterance}, g_jobs);
    if (seed == 1) {
      g_seed1_sft = r.sft_model;
      g_have_seed1_sft = true;
    }
    const double sft = r.sft.bad_case_ratio;
    const double fpo = r.methods.at("fpo_token_sigmoid").bad_case_ratio;
    const double dpo = r.methods.at("dpo_utterance").bad_case_ratio;
    sft_in_band = sft_in_band && sft >= kSftBadLow && sft <= kSftBadHigh;
    enough_pairs = enough_pairs && r.pairs >= kMinPairs;
    if (fpo <= dpo) ++fpo_wins;
    sum_sft += sft;
    sum_fpo += fpo;
    detail << fmt("seed %lu: sft %.3f fpo %.3f dpo %.3f pairs %d; ", static_cast<unsigned long>(seed), sft, fpo, dpo,
                  r.pairs);
  }
  const double improvement = (sum_sft - sum_fpo) / sum_sft;
  detail << fmt("mean relative improvement %.1f%% (need >= %.0f%%), fpo <= dpo in %d/%zu seeds", 100 * improvement,
                100 * kMinRelativeImprovement, fpo_wins, kSeeds.size());
  const bool ok = sft_in_band && enough_pairs && improvement >= kMinRelativeImprovement && fpo_wins >= kFpoBeatsDpoSeeds;
  return {ok, detail.str()};
}

Outcome data_efficiency() {
  ExperimentConfig cfg;
  if (!g_have_seed1_sft) {
    cfg.seed = 1;
    g_seed1_sft = train_sft_model(cfg, build_sft_data(cfg), g_jobs).model;
    g_have_seed1_sft = true;
  }
  const SweepReport r = sweep(g_seed1_sft, cfg.task(), cfg.pairs, cfg.train, cfg.eval, cfg.sweep, g_jobs);
  int wins = 0;
  std::ostringstream detail;
  for (int budget : cfg.sweep.budgets) {
    const SweepCell* f = r.cell(budget, "fpo");
    const SweepCell* d = r.cell(budget, "dpo");
    if (f->mean_bad_case <= d->mean_bad_case) ++wins;
    detail << fmt("%d: fpo %.3f dpo %.3f%s; ", budget, f->mean_bad_case, d->mean_bad_case,
                  f->partial || d->partial ? " (partial)" : "");
  }
  detail << fmt("fpo <= dpo in %d/%zu cells", wins, cfg.sweep.budgets.size());
  return {wins >= kFpoBeatsDpoCells, detail.str()};
}

std::vector<std::string> run_pipeline(const std::string& config, const fs::path& out, const std::string& log) {
  std::vector<std::string> failed;
  for (const std::string& cmd : cli::pipeline_commands()) {
    const std::string env = "FPO_OUT_DIR='" + out.string() + "'";
    if (cli::run(cmd + " -c '" + config + "'", log, env) != 0) failed.push_back(cmd);
  }
  return failed;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("fpo_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string config = (dir / "cfg.json").string();
  const std::string log = (dir / "log.txt").string();
  cli::write_config(config, cli::tiny_config((dir / "unused").string()));
  const auto fa = run_pipeline(config, dir / "a", log);
  const auto fb = run_pipeline(config, dir / "b", log);
  if (!fa.empty() || !fb.empty()) {
    const std::string first = fa.empty() ? fb.front() : fa.front();
    fs::remove_all(dir);
    return {false, "command failed: " + first};
  }
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(dir / "a")) names.insert(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(dir / "b")) names.insert(e.path().filename().string());
  int differing = 0;
  std::string first_diff;
  for (const std::string& n : names) {
    if (!fs::exists(dir / "a" / n) || !fs::exists(dir / "b" / n) ||
        cli::slurp(dir / "a" / n) != cli::slurp(dir / "b" / n)) {
      if (differing++ == 0) first_diff = n;
    }
  }
  fs::remove_all(dir);
  return {differing == 0 && !names.empty(),
          fmt("%zu artifacts from %zu commands compared across two runs, %d differ%s%s", names.size(),
              cli::pipeline_commands().size(), differing, differing ? ", first: " : "", first_diff.c_str())};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
  double budget_s;  // 0: no runtime bound
};

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--jobs") == 0 && i + 1 < argc) {
      g_jobs = std::max(1, std::atoi(argv[++i]));
    } else {
      only.insert(argv[i]);
    }
  }
  const std::vector<Criterion> criteria{
      {"gradient_suite", gradient_suite, kGradBudget},
      {"loss_identities", loss_identities, 0},
      {"mask_policy", mask_policy, kMaskBudget},
      {"alignment_oracle", alignment_oracle, kAlignBudget},
      {"scorer_suite", scorer_suite, 0},
      {"end_to_end", end_to_end, kEndToEndBudget},
      {"data_efficiency", data_efficiency, kSweepBudget},
      {"determinism", determinism, 0},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_s == 0 || secs < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s %s: %s [%.1f s%s]\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                c.budget_s > 0 ? fmt(", limit %.0f s", c.budget_s).c_str() : "");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
