#include <benchmark/benchmark.h>

#include "fpo/annotate.hpp"
#include "fpo/config.hpp"
#include "fpo/optimloss.hpp"
#include "fpo/pipeline.hpp"
#include "fpo/scoring.hpp"

using namespace fpo;

namespace {

const ExperimentConfig& cfg() {
  static const ExperimentConfig c;
  return c;
}

// Clean render against an injected copy, both drawn from the default task.
std::vector<PreferencePair> pairs(int n) {
  const TaskSpec spec = cfg().task();
  Rng rng(5);
  std::vector<PreferencePair> out;
  while (static_cast<int>(out.size()) < n) {
    const TokenSeq text = random_text(spec, rng);
    const TokenSeq ref = reference_render(spec, text);
    const ErrorKind kind = kAllErrorKinds[out.size() % kAllErrorKinds.size()];
    try {
      const TokenSeq bad = inject_error(ref, kind, rng(), spec.injection).corrupted;
      PreferencePair p = annotate_pair(text, ref, ref, bad);
      if (!p.masks.degenerate) out.push_back(std::move(p));
    } catch (const InjectionError&) {
    }
  }
  return out;
}

TokenSeq random_seq(Rng& rng, std::size_t n) {
  TokenSeq s(n);
  for (TokenId& t : s) t = static_cast<TokenId>(uniform_int(rng, 4, 11));
  return s;
}

}  // namespace

static void BM_SequenceLogprob(benchmark::State& state) {
  const ModelCheckpoint m = init_model(cfg().model, 1);
  const PreferencePair p = pairs(1)[0];
  for (auto _ : state) benchmark::DoNotOptimize(sequence_logprob(m, p.condition, p.loser));
}
BENCHMARK(BM_SequenceLogprob);

static void BM_GradLoglik(benchmark::State& state) {
  const ModelCheckpoint m = init_model(cfg().model, 1);
  const PreferencePair p = pairs(1)[0];
  for (auto _ : state) benchmark::DoNotOptimize(grad_loglik(m, p.condition, p.loser));
}
BENCHMARK(BM_GradLoglik);

static void BM_Align(benchmark::State& state) {
  Rng rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  const TokenSeq a = random_seq(rng, n), b = random_seq(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(align(a, b));
}
BENCHMARK(BM_Align)->Arg(8)->Arg(32)->Arg(128);

static void BM_PreferenceLoss(benchmark::State& state) {
  const auto variant = static_cast<LossVariant>(state.range(0));
  const ModelCheckpoint theta = init_model(cfg().model, 1);
  const ModelCheckpoint ref = init_model(cfg().model, 2);
  const auto data = pairs(16);
  std::vector<PairBatchItem> batch;
  for (const auto& p : data) batch.push_back(prepare_item(p, ref, LengthPolicy::kAligned));
  TrainConfig tc;
  tc.loss_variant = variant;
  for (auto _ : state) benchmark::DoNotOptimize(preference_loss(theta, batch, tc));
  state.SetLabel(std::string(variant_name(variant)));
}
BENCHMARK(BM_PreferenceLoss)
    ->Arg(static_cast<int>(LossVariant::kFpoTokenSigmoid))
    ->Arg(static_cast<int>(LossVariant::kFpoSequenceSigmoid))
    ->Arg(static_cast<int>(LossVariant::kDpoUtterance));

static void BM_SampleGroup(benchmark::State& state) {
  const ModelCheckpoint m = init_model(cfg().model, 1);
  const TaskSpec spec = cfg().task();
  Rng rng(4);
  const TokenSeq text = random_text(spec, rng);
  const PairBuildConfig& pc = cfg().pairs;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_group(m, spec, text, pc.sampling, pc.weights, pc.penalties, 7));
  }
}
BENCHMARK(BM_SampleGroup);

BENCHMARK_MAIN();
