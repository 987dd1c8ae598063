#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fpo/error.hpp"
#include "fpo/model.hpp"
#include "support/oracles.hpp"

using namespace fpo;

namespace {

ModelCheckpoint scaled_model(const ModelConfig& cfg, std::uint64_t seed, double scale) {
  ModelCheckpoint m = init_model(cfg, seed);
  for (double& p : m.params) p *= scale;
  return m;
}

ModelCheckpoint uniform_model(const ModelConfig& cfg) {
  ModelCheckpoint m = init_model(cfg, 3);
  const ParamLayout l = m.layout();
  for (std::size_t i = l.out_weight; i < l.total; ++i) m.params[i] = 0.0;
  return m;
}

TokenSeq random_output(Rng& rng, int vocab, std::size_t len) {
  TokenSeq out;
  for (std::size_t i = 0; i + 1 < len; ++i) out.push_back(static_cast<TokenId>(uniform_int(rng, 3, vocab - 1)));
  out.push_back(kEos);
  return out;
}

}  // namespace

TEST(Model, InitIsDeterministic) {
  const ModelConfig cfg{16, 8, 20};
  EXPECT_EQ(init_model(cfg, 42), init_model(cfg, 42));
  EXPECT_NE(init_model(cfg, 42).params, init_model(cfg, 43).params);
}

TEST(Model, ParamCountMatchesHandCount) {
  const ModelConfig cfg{4, 8, 10};
  // embedding 4x8, recurrent 8x8, hidden bias 8, output 4x8, output bias 4
  EXPECT_EQ(init_model(cfg, 0).params.size(), 32u + 64u + 8u + 32u + 4u);
}

TEST(Model, InitRangeIsSmallAndSymmetric) {
  const ModelCheckpoint m = init_model({32, 48, 40}, 5);
  double lo = 1.0, hi = -1.0, mean = 0.0;
  for (double p : m.params) {
    lo = std::min(lo, p);
    hi = std::max(hi, p);
    mean += p;
  }
  mean /= static_cast<double>(m.params.size());
  EXPECT_GE(lo, -0.08);
  EXPECT_LE(hi, 0.08);
  EXPECT_LT(std::abs(mean), 0.005);
}

TEST(Model, RejectsInvalidConfig) {
  EXPECT_THROW(init_model({2, 8, 10}, 0), ConfigError);
  EXPECT_THROW(init_model({8, 0, 10}, 0), ConfigError);
  EXPECT_THROW(init_model({8, 8, 1}, 0), ConfigError);
}

TEST(Model, UniformOutputLayerGivesUniformTrace) {
  const ModelCheckpoint m = uniform_model({4, 8, 10});
  const LogProbTrace t = sequence_logprob(m, TokenSeq{}, TokenSeq{3, 3, kEos});
  ASSERT_EQ(t.size(), 3u);
  for (double v : t.values) EXPECT_NEAR(v, std::log(0.25), 1e-15);
  EXPECT_NEAR(t.total(), 3.0 * std::log(0.25), 1e-14);
}

TEST(Model, TraceMatchesPlainLoopForwardPass) {
  Rng rng(7);
  for (int inst = 0; inst < 20; ++inst) {
    const ModelCheckpoint m = scaled_model({12, 6, 24}, 100 + inst, 15.0);
    TokenSeq cond;
    for (int i = 0; i < 3; ++i) cond.push_back(static_cast<TokenId>(uniform_int(rng, 3, 11)));
    const TokenSeq out = random_output(rng, 12, 1 + static_cast<std::size_t>(uniform_int(rng, 0, 8)));
    const auto expected = oracle::elman_logprobs(m, cond, out);
    const LogProbTrace got = sequence_logprob(m, cond, out);
    ASSERT_EQ(got.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(got[i], expected[i], 1e-12);
  }
}

TEST(Model, TwoTokenOutputIsProductOfConditionals) {
  const ModelCheckpoint m = scaled_model({8, 5, 12}, 9, 10.0);
  const TokenSeq cond{5, 6};
  const TokenSeq out{4, kEos};
  const auto lp = oracle::elman_logprobs(m, cond, out);
  const double joint = std::exp(lp[0]) * std::exp(lp[1]);
  EXPECT_NEAR(sequence_logprob(m, cond, out).total(), std::log(joint), 1e-12);
}

TEST(Model, EveryTraceEntryIsNonPositive) {
  const ModelCheckpoint m = scaled_model({10, 6, 20}, 2, 20.0);
  for (double v : sequence_logprob(m, TokenSeq{4, 5}, TokenSeq{6, 7, 8, kEos}).values) EXPECT_LE(v, 0.0);
}

TEST(Model, NextTokenDistributionsAreNormalized) {
  const ModelCheckpoint m = scaled_model({16, 8, 20}, 4, 10.0);
  const auto rows = next_token_logprobs(m, TokenSeq{5, 9}, TokenSeq{4, 7, 3, kEos});
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& row : rows) {
    double s = 0.0;
    for (double v : row) s += std::exp(v);
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Model, RejectsMalformedSequences) {
  const ModelCheckpoint m = init_model({8, 4, 6}, 1);
  EXPECT_THROW(sequence_logprob(m, TokenSeq{}, TokenSeq{9, kEos}), DomainError);
  EXPECT_THROW(sequence_logprob(m, TokenSeq{}, TokenSeq{4, 5}), MalformedSequenceError);
  EXPECT_THROW(sequence_logprob(m, TokenSeq{}, TokenSeq{4, kEos, 5, kEos}), MalformedSequenceError);
  EXPECT_THROW(sequence_logprob(m, TokenSeq{4, 4, 4}, TokenSeq{4, 4, 4, kEos}), DomainError);
}

TEST(Model, OutputBiasGradientAtUniformPoint) {
  const int V = 6;
  const ModelCheckpoint m = uniform_model({V, 5, 12});
  const TokenSeq out{4, 4, 5, kEos};
  const auto g = grad_loglik(m, TokenSeq{3}, out);
  const std::size_t ob = m.layout().out_bias;
  for (int v = 0; v < V; ++v) {
    const double occurrences = static_cast<double>(std::count(out.begin(), out.end(), v));
    EXPECT_NEAR(g[ob + static_cast<std::size_t>(v)], occurrences - static_cast<double>(out.size()) / V, 1e-12);
  }
}

TEST(Model, EosOnlyGradientIsSingleSoftmaxStep) {
  const ModelCheckpoint m = scaled_model({7, 4, 8}, 12, 5.0);
  const auto g = grad_loglik(m, TokenSeq{4, 5}, TokenSeq{kEos});
  const auto row = next_token_logprobs(m, TokenSeq{4, 5}, TokenSeq{kEos})[0];
  const std::size_t ob = m.layout().out_bias;
  for (int v = 0; v < 7; ++v) {
    EXPECT_NEAR(g[ob + static_cast<std::size_t>(v)], (v == kEos ? 1.0 : 0.0) - std::exp(row[static_cast<std::size_t>(v)]),
                1e-12);
  }
}

TEST(Model, GradientMatchesFiniteDifferences) {
  Rng rng(21);
  for (int inst = 0; inst < 20; ++inst) {
    const ModelCheckpoint m = scaled_model({12, 8, 24}, 300 + inst, 8.0);
    const TokenSeq cond{static_cast<TokenId>(uniform_int(rng, 3, 11))};
    const TokenSeq out = random_output(rng, 12, 2 + static_cast<std::size_t>(uniform_int(rng, 0, 10)));
    const GradCheckReport r = gradient_check(m, cond, out, 1e-5, 50, 1000 + inst);
    EXPECT_EQ(r.coords_checked, 50u);
    EXPECT_LT(r.max_rel_error, 1e-4) << "instance " << inst;
  }
}

TEST(Model, FreshModelPassesGradientCheck) {
  const ModelCheckpoint m = init_model({32, 48, 40}, 1);
  EXPECT_LT(gradient_check(m, TokenSeq{28, 29}, TokenSeq{5, 6, 7, kEos}, 1e-5, 50, 1).max_rel_error, 1e-4);
}

TEST(Model, GradientCheckRejectsBadStep) {
  const ModelCheckpoint m = init_model({8, 4, 10}, 1);
  EXPECT_THROW(gradient_check(m, TokenSeq{}, TokenSeq{4, kEos}, 0.0, 5), PreconditionError);
  EXPECT_THROW(gradient_check(m, TokenSeq{}, TokenSeq{4, kEos}, 1e-2, 5), PreconditionError);
}

TEST(Model, FiniteDifferenceErrorShrinksQuadratically) {
  const ModelCheckpoint m = scaled_model({8, 4, 12}, 77, 10.0);
  const TokenSeq out{4, 5, 6, kEos};
  const auto analytic = grad_loglik(m, TokenSeq{}, out);
  const std::size_t c = m.layout().hidden_bias;
  auto fd_error = [&](double h) {
    ModelCheckpoint p = m;
    p.params[c] = m.params[c] + h;
    const double up = sequence_logprob(p, TokenSeq{}, out).total();
    p.params[c] = m.params[c] - h;
    const double down = sequence_logprob(p, TokenSeq{}, out).total();
    return std::abs((up - down) / (2 * h) - analytic[c]);
  };
  const double ratio = fd_error(2e-3) / fd_error(1e-3);
  EXPECT_GT(ratio, 3.5);
  EXPECT_LT(ratio, 4.5);
}

TEST(Model, TopOneSamplingEqualsGreedy) {
  const ModelCheckpoint m = scaled_model({16, 8, 20}, 8, 30.0);
  const TokenSeq greedy = greedy_decode(m, TokenSeq{12, 13});
  for (std::uint64_t s = 0; s < 50; ++s) EXPECT_EQ(sample(m, TokenSeq{12, 13}, {1.0, 1}, s).output, greedy);
}

TEST(Model, ColdSamplingConvergesToGreedy) {
  const ModelCheckpoint m = scaled_model({16, 8, 20}, 8, 30.0);
  const TokenSeq greedy = greedy_decode(m, TokenSeq{12, 13});
  for (std::uint64_t s = 0; s < 20; ++s) EXPECT_EQ(sample(m, TokenSeq{12, 13}, {1e-3, 0}, s).output, greedy);
}

TEST(Model, SamplingIsDeterministic) {
  const ModelCheckpoint m = scaled_model({16, 8, 20}, 8, 10.0);
  const GenSample a = sample(m, TokenSeq{12}, {1.3, 5}, 99);
  const GenSample b = sample(m, TokenSeq{12}, {1.3, 5}, 99);
  EXPECT_EQ(a.output, b.output);
  EXPECT_EQ(a.meta.seed, 99u);
  EXPECT_EQ(a.meta.top_k, 5);
  EXPECT_TRUE(ends_with_eos(a.output));
}

TEST(Model, SamplingRejectsBadSettings) {
  const ModelCheckpoint m = init_model({8, 4, 10}, 1);
  EXPECT_THROW(sample(m, TokenSeq{}, {0.0, 0}, 1), PreconditionError);
  EXPECT_THROW(sample(m, TokenSeq{}, {1.0, 9}, 1), PreconditionError);
}

TEST(Model, RunawayGenerationIsTruncated) {
  ModelCheckpoint m = uniform_model({8, 4, 10});
  m.params[m.layout().out_bias + kEos] = -100.0;
  const GenSample s = sample(m, TokenSeq{5, 6}, {1.0, 0}, 3);
  EXPECT_TRUE(s.meta.truncated);
  EXPECT_EQ(s.output.size(), 8u);
  EXPECT_EQ(s.output.back(), kEos);
}

TEST(Model, CheckpointRoundTrip) {
  const ModelCheckpoint m = scaled_model({16, 8, 20}, 6, 3.0);
  const auto path = std::filesystem::temp_directory_path() / "fpo_test_model.ckpt";
  save_checkpoint(path.string(), m, 0x1234abcdULL);
  const LoadedCheckpoint back = load_checkpoint(path.string());
  EXPECT_EQ(back.ckpt, m);
  EXPECT_EQ(back.config_hash, 0x1234abcdULL);
  EXPECT_EQ(param_checksum(back.ckpt), param_checksum(m));

  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(-3, std::ios::end);
  f.put('\x7f');
  f.close();
  EXPECT_THROW(load_checkpoint(path.string()), InputError);
  EXPECT_THROW(load_checkpoint((path.string() + ".missing")), InputError);
  std::filesystem::remove(path);
}
