#include "fpo/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "fpo/error.hpp"
#include "fpo/rng.hpp"

namespace fpo {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

constexpr double kInitScale = 0.08;

struct Weights {
  ConstMatMap embed;
  ConstMatMap recurrent;
  ConstVecMap hidden_bias;
  ConstMatMap out_weight;
  ConstVecMap out_bias;

  explicit Weights(const ModelCheckpoint& ckpt)
      : Weights(ckpt.config, ckpt.layout(), ckpt.params.data()) {}

  Weights(const ModelConfig& cfg, const ParamLayout& l, const double* p)
      : embed(p + l.embed, cfg.vocab_size, cfg.hidden_dim),
        recurrent(p + l.recurrent, cfg.hidden_dim, cfg.hidden_dim),
        hidden_bias(p + l.hidden_bias, cfg.hidden_dim),
        out_weight(p + l.out_weight, cfg.vocab_size, cfg.hidden_dim),
        out_bias(p + l.out_bias, cfg.vocab_size) {}
};

struct GradMaps {
  MatMap embed;
  MatMap recurrent;
  VecMap hidden_bias;
  MatMap out_weight;
  VecMap out_bias;

  GradMaps(const ModelConfig& cfg, const ParamLayout& l, double* p)
      : embed(p + l.embed, cfg.vocab_size, cfg.hidden_dim),
        recurrent(p + l.recurrent, cfg.hidden_dim, cfg.hidden_dim),
        hidden_bias(p + l.hidden_bias, cfg.hidden_dim),
        out_weight(p + l.out_weight, cfg.vocab_size, cfg.hidden_dim),
        out_bias(p + l.out_bias, cfg.vocab_size) {}
};

// The model reads the condition, then BOS, then every output token but the
// last. Predictions start at the BOS step.
std::vector<TokenId> input_stream(std::span<const TokenId> condition,
                                  std::span<const TokenId> output) {
  std::vector<TokenId> in;
  in.reserve(condition.size() + output.size());
  in.insert(in.end(), condition.begin(), condition.end());
  in.push_back(kBos);
  in.insert(in.end(), output.begin(), output.end() - 1);
  return in;
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

void step(const Weights& w, TokenId x, const Eigen::VectorXd& prev, Eigen::VectorXd& next) {
  next = (w.embed.row(x).transpose() + w.recurrent * prev + w.hidden_bias).array().tanh();
}

struct Forward {
  std::vector<TokenId> inputs;
  Eigen::MatrixXd hidden;   // H x (T+1); column 0 is the zero initial state
  Eigen::MatrixXd logprob;  // V x m
  std::size_t first_pred = 0;
};

Forward run_forward(const ModelCheckpoint& ckpt, std::span<const TokenId> condition,
                    std::span<const TokenId> output) {
  validate_io(ckpt.config, condition, output);
  const Weights w(ckpt);
  Forward f;
  f.inputs = input_stream(condition, output);
  const auto steps = f.inputs.size();
  const int hdim = ckpt.config.hidden_dim;
  f.hidden = Eigen::MatrixXd::Zero(hdim, static_cast<Eigen::Index>(steps + 1));
  f.first_pred = condition.size();
  f.logprob.resize(ckpt.config.vocab_size, static_cast<Eigen::Index>(output.size()));
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(hdim);
  Eigen::VectorXd next(hdim);
  for (std::size_t t = 0; t < steps; ++t) {
    step(w, f.inputs[t], prev, next);
    f.hidden.col(static_cast<Eigen::Index>(t + 1)) = next;
    if (t >= f.first_pred) {
      const Eigen::VectorXd logits = w.out_weight * next + w.out_bias;
      f.logprob.col(static_cast<Eigen::Index>(t - f.first_pred)) = log_softmax(logits);
    }
    std::swap(prev, next);
  }
  return f;
}

}  // namespace

std::string_view architecture_name(Architecture a) {
  switch (a) {
    case Architecture::kElmanTanh:
      return "elman_tanh";
  }
  return "unknown";
}

Architecture architecture_from_name(std::string_view name) {
  if (name == "elman_tanh") return Architecture::kElmanTanh;
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (vocab_size < 4) throw ConfigError("vocab_size must be >= 4 (PAD, BOS, EOS and content)");
  if (vocab_size > 4096) throw ConfigError("vocab_size too large");
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be positive");
  if (max_len < 2) throw ConfigError("max_len must be >= 2");
  if (architecture != Architecture::kElmanTanh) throw ConfigError("unsupported architecture");
}

std::size_t ModelConfig::param_count() const { return ParamLayout::of(*this).total; }

ParamLayout ParamLayout::of(const ModelConfig& cfg) {
  const auto v = static_cast<std::size_t>(cfg.vocab_size);
  const auto h = static_cast<std::size_t>(cfg.hidden_dim);
  ParamLayout l;
  l.embed = 0;
  l.recurrent = l.embed + v * h;
  l.hidden_bias = l.recurrent + h * h;
  l.out_weight = l.hidden_bias + h;
  l.out_bias = l.out_weight + v * h;
  l.total = l.out_bias + v;
  return l;
}

void ModelCheckpoint::check_invariants() const {
  config.validate();
  if (params.size() != config.param_count()) throw InternalError("parameter count mismatch");
  for (double p : params) {
    if (!std::isfinite(p)) throw InternalError("non-finite parameter");
  }
}

double LogProbTrace::total() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

ModelCheckpoint init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelCheckpoint ckpt;
  ckpt.config = config;
  ckpt.rng_seed = seed;
  ckpt.params.resize(config.param_count());
  Rng rng(seed);
  for (double& p : ckpt.params) p = (2.0 * uniform01(rng) - 1.0) * kInitScale;
  return ckpt;
}

void validate_io(const ModelConfig& config, std::span<const TokenId> condition,
                 std::span<const TokenId> output) {
  auto check_range = [&](std::span<const TokenId> s) {
    for (TokenId t : s) {
      if (t < 0 || t >= config.vocab_size) {
        throw DomainError("token id " + std::to_string(t) + " outside vocabulary of size " +
                          std::to_string(config.vocab_size));
      }
    }
  };
  check_range(condition);
  check_range(output);
  if (!ends_with_eos(output)) throw MalformedSequenceError("output must end with EOS");
  if (std::find(output.begin(), output.end() - 1, kEos) != output.end() - 1) {
    throw MalformedSequenceError("EOS inside output");
  }
  if (condition.size() + output.size() > static_cast<std::size_t>(config.max_len)) {
    throw DomainError("condition + output exceeds max_len");
  }
}

LogProbTrace sequence_logprob(const ModelCheckpoint& ckpt, std::span<const TokenId> condition,
                              std::span<const TokenId> output) {
  const Forward f = run_forward(ckpt, condition, output);
  LogProbTrace trace;
  trace.values.resize(output.size());
  for (std::size_t i = 0; i < output.size(); ++i) {
    trace.values[i] = f.logprob(output[i], static_cast<Eigen::Index>(i));
  }
  return trace;
}

std::vector<std::vector<double>> next_token_logprobs(const ModelCheckpoint& ckpt,
                                                     std::span<const TokenId> condition,
                                                     std::span<const TokenId> output) {
  const Forward f = run_forward(ckpt, condition, output);
  std::vector<std::vector<double>> out(output.size());
  for (std::size_t i = 0; i < output.size(); ++i) {
    const auto col = f.logprob.col(static_cast<Eigen::Index>(i));
    out[i].assign(col.data(), col.data() + col.size());
  }
  return out;
}

LogProbTrace accumulate_weighted_grad(const ModelCheckpoint& ckpt,
                                      std::span<const TokenId> condition,
                                      std::span<const TokenId> output,
                                      std::span<const double> weights, std::span<double> grad) {
  if (weights.size() != output.size()) throw InternalError("weight/output length mismatch");
  if (grad.size() != ckpt.params.size()) throw InternalError("gradient buffer size mismatch");
  const Forward f = run_forward(ckpt, condition, output);
  const Weights w(ckpt);
  const ModelConfig& cfg = ckpt.config;
  GradMaps g(cfg, ckpt.layout(), grad.data());

  LogProbTrace trace;
  trace.values.resize(output.size());
  const auto steps = f.inputs.size();
  const int hdim = cfg.hidden_dim;

  // Backward through time. carry holds dL/dh_t flowing from step t+1.
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(hdim);
  Eigen::VectorXd dlogit(cfg.vocab_size);
  for (std::size_t t = steps; t-- > 0;) {
    const auto col = static_cast<Eigen::Index>(t + 1);
    Eigen::VectorXd dh = carry;
    if (t >= f.first_pred) {
      const std::size_t k = t - f.first_pred;
      const auto lp = f.logprob.col(static_cast<Eigen::Index>(k));
      trace.values[k] = lp(output[k]);
      const double wk = weights[k];
      if (wk != 0.0) {
        // d/dlogits of wk * log p(y) = wk * (onehot(y) - softmax).
        dlogit = -wk * lp.array().exp();
        dlogit(output[k]) += wk;
        g.out_weight.noalias() += dlogit * f.hidden.col(col).transpose();
        g.out_bias += dlogit;
        dh.noalias() += w.out_weight.transpose() * dlogit;
      }
    }
    const Eigen::VectorXd da =
        dh.array() * (1.0 - f.hidden.col(col).array().square());
    g.recurrent.noalias() += da * f.hidden.col(col - 1).transpose();
    g.hidden_bias += da;
    g.embed.row(f.inputs[t]) += da.transpose();
    carry.noalias() = w.recurrent.transpose() * da;
  }
  return trace;
}

std::vector<double> grad_loglik(const ModelCheckpoint& ckpt, std::span<const TokenId> condition,
                                std::span<const TokenId> output) {
  std::vector<double> grad(ckpt.params.size(), 0.0);
  const std::vector<double> ones(output.size(), 1.0);
  accumulate_weighted_grad(ckpt, condition, output, ones, grad);
  return grad;
}

namespace {

struct Decoder {
  const ModelCheckpoint& ckpt;
  Weights w;
  Eigen::VectorXd state;
  Eigen::VectorXd scratch;

  explicit Decoder(const ModelCheckpoint& c)
      : ckpt(c),
        w(c),
        state(Eigen::VectorXd::Zero(c.config.hidden_dim)),
        scratch(c.config.hidden_dim) {}

  void feed(TokenId x) {
    step(w, x, state, scratch);
    std::swap(state, scratch);
  }
  Eigen::VectorXd logits() const { return w.out_weight * state + w.out_bias; }
};

std::size_t output_budget(const ModelConfig& cfg, std::span<const TokenId> condition) {
  if (condition.size() + 1 > static_cast<std::size_t>(cfg.max_len)) {
    throw DomainError("condition leaves no room for output");
  }
  return static_cast<std::size_t>(cfg.max_len) - condition.size();
}

void check_condition(const ModelConfig& cfg, std::span<const TokenId> condition) {
  for (TokenId t : condition) {
    if (t < 0 || t >= cfg.vocab_size) throw DomainError("condition token outside vocabulary");
  }
}

TokenId argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<TokenId>(best);
}

}  // namespace

GenSample sample(const ModelCheckpoint& ckpt, std::span<const TokenId> condition,
                 const SampleSettings& settings, std::uint64_t seed) {
  const ModelConfig& cfg = ckpt.config;
  if (!(settings.temperature > 0.0)) throw PreconditionError("temperature must be positive");
  const int top_k = settings.top_k == 0 ? cfg.vocab_size : settings.top_k;
  if (top_k < 1 || top_k > cfg.vocab_size) throw PreconditionError("top_k outside [1, vocab_size]");
  check_condition(cfg, condition);
  const std::size_t budget = output_budget(cfg, condition);

  GenSample out;
  out.condition.assign(condition.begin(), condition.end());
  out.meta.temperature = settings.temperature;
  out.meta.top_k = settings.top_k;
  out.meta.seed = seed;

  Rng rng(seed);
  Decoder dec(ckpt);
  for (TokenId t : condition) dec.feed(t);
  dec.feed(kBos);

  std::vector<int> order(static_cast<std::size_t>(cfg.vocab_size));
  std::vector<double> probs(static_cast<std::size_t>(top_k));
  while (true) {
    if (out.output.size() + 1 == budget) {
      out.output.push_back(kEos);
      out.meta.truncated = true;
      break;
    }
    const Eigen::VectorXd logits = dec.logits() / settings.temperature;
    for (int i = 0; i < cfg.vocab_size; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return logits(a) > logits(b); });
    const double top = logits(order[0]);
    double z = 0.0;
    for (int i = 0; i < top_k; ++i) {
      probs[static_cast<std::size_t>(i)] = std::exp(logits(order[static_cast<std::size_t>(i)]) - top);
      z += probs[static_cast<std::size_t>(i)];
    }
    const double u = uniform01(rng) * z;
    double acc = 0.0;
    int pick = order[static_cast<std::size_t>(top_k - 1)];
    for (int i = 0; i < top_k; ++i) {
      acc += probs[static_cast<std::size_t>(i)];
      if (u < acc) {
        pick = order[static_cast<std::size_t>(i)];
        break;
      }
    }
    out.output.push_back(static_cast<TokenId>(pick));
    if (pick == kEos) break;
    dec.feed(static_cast<TokenId>(pick));
  }
  return out;
}

TokenSeq greedy_decode(const ModelCheckpoint& ckpt, std::span<const TokenId> condition) {
  check_condition(ckpt.config, condition);
  const std::size_t budget = output_budget(ckpt.config, condition);
  Decoder dec(ckpt);
  for (TokenId t : condition) dec.feed(t);
  dec.feed(kBos);
  TokenSeq out;
  while (true) {
    if (out.size() + 1 == budget) {
      out.push_back(kEos);
      break;
    }
    const TokenId pick = argmax(dec.logits());
    out.push_back(pick);
    if (pick == kEos) break;
    dec.feed(pick);
  }
  return out;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport gradient_check(const ModelCheckpoint& ckpt, std::span<const TokenId> condition,
                               std::span<const TokenId> output, double h, int coords,
                               std::uint64_t seed) {
  const std::vector<double> analytic = grad_loglik(ckpt, condition, output);
  ModelCheckpoint probe = ckpt;
  auto objective = [&](const std::vector<double>& p) {
    probe.params = p;
    return sequence_logprob(probe, condition, output).total();
  };
  return finite_difference_check(ckpt.params, analytic, objective, h, coords, seed);
}

std::uint64_t param_checksum(const ModelCheckpoint& ckpt) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double p : ckpt.params) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &p, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace fpo
