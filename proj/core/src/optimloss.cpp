#include "fpo/optimloss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fpo/error.hpp"
#include "fpo/parallel.hpp"
#include "fpo/rng.hpp"

namespace fpo {

std::string_view variant_name(LossVariant v) {
  switch (v) {
    case LossVariant::kFpoTokenSigmoid:
      return "fpo_token_sigmoid";
    case LossVariant::kFpoSequenceSigmoid:
      return "fpo_sequence_sigmoid";
    case LossVariant::kDpoUtterance:
      return "dpo_utterance";
  }
  return "unknown";
}

LossVariant variant_from_name(std::string_view name) {
  if (name == "fpo_token_sigmoid" || name == "fpo") return LossVariant::kFpoTokenSigmoid;
  if (name == "fpo_sequence_sigmoid") return LossVariant::kFpoSequenceSigmoid;
  if (name == "dpo_utterance" || name == "dpo") return LossVariant::kDpoUtterance;
  throw ConfigError("unknown loss variant '" + std::string(name) + "'");
}

std::string_view optimizer_name(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adamw"; }

OptimizerKind optimizer_from_name(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adamw") return OptimizerKind::kAdamW;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view reduction_name(TokenReduction r) { return r == TokenReduction::kSum ? "sum" : "mean"; }

TokenReduction reduction_from_name(std::string_view name) {
  if (name == "sum") return TokenReduction::kSum;
  if (name == "mean") return TokenReduction::kMean;
  throw ConfigError("unknown token reduction '" + std::string(name) + "'");
}

std::string_view schedule_name(LrSchedule s) {
  return s == LrSchedule::kConstant ? "constant" : "linear_decay";
}

LrSchedule schedule_from_name(std::string_view name) {
  if (name == "constant") return LrSchedule::kConstant;
  if (name == "linear_decay") return LrSchedule::kLinearDecay;
  throw ConfigError("unknown lr schedule '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be nonnegative");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be nonnegative");
}

double log_sigmoid(double z) {
  // log sigmoid(z) = -log1p(exp(-z)), evaluated on the side that cannot overflow.
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> token_log_ratios(const LogProbTrace& theta, const LogProbTrace& ref) {
  if (theta.size() != ref.size()) throw InternalError("trace length mismatch");
  std::vector<double> out(theta.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = theta[i] - ref[i];
  return out;
}

namespace {

// Ordered sum; DPO and the masked sequence variant share it so that an
// all-ones mask reproduces DPO bit for bit.
double masked_sum(std::span<const double> v, const IndicatorMask* mask) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (mask == nullptr || mask->test(i)) s += v[i];
  }
  return s;
}

}  // namespace

PairLoss dpo_pair_loss(std::span<const double> ratio_w, std::span<const double> ratio_l,
                       double beta) {
  PairLoss out;
  const double z = beta * (masked_sum(ratio_w, nullptr) - masked_sum(ratio_l, nullptr));
  out.loss = -log_sigmoid(z);
  const double g = beta * sigmoid(-z);
  out.d_ratio_w.assign(ratio_w.size(), -g);
  out.d_ratio_l.assign(ratio_l.size(), g);
  return out;
}

PairLoss fpo_token_pair_loss(std::span<const double> ratio_w, std::span<const double> ratio_l,
                             std::span<const TokenPair> pairs, double beta,
                             TokenReduction reduction) {
  PairLoss out;
  out.d_ratio_w.assign(ratio_w.size(), 0.0);
  out.d_ratio_l.assign(ratio_l.size(), 0.0);
  if (pairs.empty()) return out;
  const double scale = reduction == TokenReduction::kMean ? 1.0 / static_cast<double>(pairs.size()) : 1.0;
  for (const TokenPair& p : pairs) {
    if (p.winner >= ratio_w.size() || p.loser >= ratio_l.size()) throw InternalError("token pair out of range");
    const double z = beta * (ratio_w[p.winner] - ratio_l[p.loser]);
    out.loss -= scale * log_sigmoid(z);
    const double g = scale * beta * sigmoid(-z);
    out.d_ratio_w[p.winner] -= g;
    out.d_ratio_l[p.loser] += g;
  }
  return out;
}

PairLoss fpo_sequence_pair_loss(std::span<const double> ratio_w, std::span<const double> ratio_l,
                                const PairMasks& masks, double beta) {
  if (masks.winner.size() != ratio_w.size() || masks.loser.size() != ratio_l.size()) {
    throw InternalError("mask length does not match trace length");
  }
  PairLoss out;
  out.d_ratio_w.assign(ratio_w.size(), 0.0);
  out.d_ratio_l.assign(ratio_l.size(), 0.0);
  if (!masks.winner.any() && !masks.loser.any()) return out;
  const double z = beta * (masked_sum(ratio_w, &masks.winner) - masked_sum(ratio_l, &masks.loser));
  out.loss = -log_sigmoid(z);
  const double g = beta * sigmoid(-z);
  for (std::size_t i = 0; i < ratio_w.size(); ++i) {
    if (masks.winner.test(i)) out.d_ratio_w[i] = -g;
  }
  for (std::size_t i = 0; i < ratio_l.size(); ++i) {
    if (masks.loser.test(i)) out.d_ratio_l[i] = g;
  }
  return out;
}

PairBatchItem prepare_item(const PreferencePair& pair, const ModelCheckpoint& ref,
                           LengthPolicy policy) {
  PairBatchItem item;
  item.pair = &pair;
  item.ref_w = sequence_logprob(ref, pair.condition, pair.winner);
  item.ref_l = sequence_logprob(ref, pair.condition, pair.loser);
  item.token_pairs = token_pairs(pair.winner, pair.loser, pair.masks, policy);
  return item;
}

namespace {

bool all_zero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

BatchLoss batch_loss(const ModelCheckpoint& theta, std::span<const PairBatchItem> batch,
                     const TrainConfig& config, int jobs) {
  if (batch.empty()) throw PreconditionError("empty preference batch");
  const std::size_t n = batch.size();
  std::vector<double> losses(n, 0.0);
  std::vector<std::vector<double>> grads(n);

  parallel_for(n, jobs, [&](std::size_t i) {
    const PairBatchItem& item = batch[i];
    const PreferencePair& pair = *item.pair;
    const auto rw = token_log_ratios(sequence_logprob(theta, pair.condition, pair.winner), item.ref_w);
    const auto rl = token_log_ratios(sequence_logprob(theta, pair.condition, pair.loser), item.ref_l);
    PairLoss pl;
    switch (config.loss_variant) {
      case LossVariant::kDpoUtterance:
        pl = dpo_pair_loss(rw, rl, config.beta);
        break;
      case LossVariant::kFpoTokenSigmoid:
        pl = fpo_token_pair_loss(rw, rl, item.token_pairs, config.beta, config.reduction);
        break;
      case LossVariant::kFpoSequenceSigmoid:
        pl = fpo_sequence_pair_loss(rw, rl, pair.masks, config.beta);
        break;
    }
    losses[i] = pl.loss;
    grads[i].assign(theta.params.size(), 0.0);
    if (!all_zero(pl.d_ratio_w)) {
      accumulate_weighted_grad(theta, pair.condition, pair.winner, pl.d_ratio_w, grads[i]);
    }
    if (!all_zero(pl.d_ratio_l)) {
      accumulate_weighted_grad(theta, pair.condition, pair.loser, pl.d_ratio_l, grads[i]);
    }
  });

  BatchLoss out;
  out.grad.assign(theta.params.size(), 0.0);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.loss += losses[i];
    for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad[k] += grads[i][k];
  }
  out.loss *= inv;
  for (double& g : out.grad) g *= inv;
  return out;
}

}  // namespace

BatchLoss dpo_loss(const ModelCheckpoint& theta, std::span<const PairBatchItem> batch,
                   const TrainConfig& config, int jobs) {
  TrainConfig c = config;
  c.loss_variant = LossVariant::kDpoUtterance;
  return batch_loss(theta, batch, c, jobs);
}

BatchLoss fpo_loss(const ModelCheckpoint& theta, std::span<const PairBatchItem> batch,
                   const TrainConfig& config, int jobs) {
  if (config.loss_variant == LossVariant::kDpoUtterance) {
    throw ConfigError("fpo_loss needs a fine-grained loss variant");
  }
  if (batch.empty()) throw PreconditionError("empty preference batch");
  const bool token = config.loss_variant == LossVariant::kFpoTokenSigmoid;
  const bool any = std::any_of(batch.begin(), batch.end(), [&](const PairBatchItem& item) {
    return token ? !item.token_pairs.empty()
                 : (item.pair->masks.winner.any() || item.pair->masks.loser.any());
  });
  if (!any) throw DegenerateBatchError("every pair in the batch has an all-zero mask");
  return batch_loss(theta, batch, config, jobs);
}

BatchLoss preference_loss(const ModelCheckpoint& theta, std::span<const PairBatchItem> batch,
                          const TrainConfig& config, int jobs) {
  return config.loss_variant == LossVariant::kDpoUtterance ? dpo_loss(theta, batch, config, jobs)
                                                           : fpo_loss(theta, batch, config, jobs);
}

void Sgd::step(std::span<double> params, std::span<const double> grad, double lr) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
}

AdamW::AdamW(std::size_t n, double beta1, double beta2, double eps, double weight_decay)
    : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

void AdamW::step(std::span<double> params, std::span<const double> grad, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * params[i]);
  }
}

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& config, std::size_t n) {
  if (config.optimizer == OptimizerKind::kSgd) return std::make_unique<Sgd>();
  return std::make_unique<AdamW>(n, config.adam_beta1, config.adam_beta2, config.adam_eps,
                                 config.weight_decay);
}

namespace {

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Shared loop: shuffles item indices every epoch, evaluates `loss_fn` on each
// mini-batch and applies the optimizer.
template <class LossFn>
std::vector<StepLog> run_loop(ModelCheckpoint& model, std::size_t items, const TrainConfig& config,
                              std::string_view variant, LossFn&& loss_fn) {
  std::vector<StepLog> log;
  if (config.epochs == 0 || items == 0) return log;
  auto optimizer = make_optimizer(config, model.params.size());
  Rng rng(derive_seed(config.seed, "shuffle"));
  std::vector<std::size_t> order(items);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t per_epoch = (items + batch - 1) / batch;
  const double total_steps = static_cast<double>(per_epoch) * config.epochs;
  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < items; start += batch) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(batch, items - start));
      BatchLoss bl = loss_fn(idx);
      const double norm = l2_norm(bl.grad);
      if (!std::isfinite(bl.loss) || !std::isfinite(norm)) {
        throw DivergenceError("training diverged at step " + std::to_string(step) + " (epoch " +
                              std::to_string(epoch) + "): loss=" + std::to_string(bl.loss) +
                              " grad_norm=" + std::to_string(norm));
      }
      if (config.grad_clip > 0.0 && norm > config.grad_clip) {
        const double s = config.grad_clip / norm;
        for (double& g : bl.grad) g *= s;
      }
      double lr = config.learning_rate;
      if (config.schedule == LrSchedule::kLinearDecay) lr *= 1.0 - step / total_steps;
      optimizer->step(model.params, bl.grad, lr);
      log.push_back({step, epoch, std::string(variant), bl.loss, norm});
      ++step;
    }
  }
  for (double p : model.params) {
    if (!std::isfinite(p)) throw DivergenceError("non-finite parameter after training");
  }
  return log;
}

}  // namespace

TrainResult train(const ModelCheckpoint& policy, const ModelCheckpoint& ref,
                  std::span<const PreferencePair> data, const TrainConfig& config, int jobs) {
  config.validate();
  if (!(policy.config == ref.config)) throw PreconditionError("policy and reference configs differ");
  const bool fine = config.loss_variant != LossVariant::kDpoUtterance;
  TrainResult result;
  result.model = policy;
  std::vector<PairBatchItem> items;
  items.reserve(data.size());
  for (const PreferencePair& p : data) {
    if (fine && p.masks.degenerate) {
      ++result.pairs_excluded;
      continue;
    }
    items.push_back(prepare_item(p, ref, config.length_policy));
  }
  if (items.empty()) throw PreconditionError("no usable preference pairs");
  result.pairs_used = static_cast<int>(items.size());

  std::vector<PairBatchItem> batch;
  result.log = run_loop(result.model, items.size(), config, variant_name(config.loss_variant),
                        [&](std::span<const std::size_t> idx) {
                          batch.clear();
                          for (std::size_t i : idx) batch.push_back(items[i]);
                          return preference_loss(result.model, batch, config, jobs);
                        });
  return result;
}

BatchLoss sft_loss(const ModelCheckpoint& model, std::span<const SftExample* const> batch, int jobs) {
  if (batch.empty()) throw PreconditionError("empty SFT batch");
  std::size_t tokens = 0;
  for (const SftExample* ex : batch) tokens += ex->target.size();
  const double w = -1.0 / static_cast<double>(tokens);
  std::vector<double> nll(batch.size(), 0.0);
  std::vector<std::vector<double>> grads(batch.size());
  parallel_for(batch.size(), jobs, [&](std::size_t i) {
    const SftExample& ex = *batch[i];
    grads[i].assign(model.params.size(), 0.0);
    const std::vector<double> weights(ex.target.size(), w);
    nll[i] = -accumulate_weighted_grad(model, ex.text, ex.target, weights, grads[i]).total();
  });
  BatchLoss out;
  out.grad.assign(model.params.size(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.loss += nll[i];
    for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad[k] += grads[i][k];
  }
  out.loss /= static_cast<double>(tokens);
  return out;
}

TrainResult sft_train(const ModelCheckpoint& model, std::span<const SftExample> data,
                      const TrainConfig& config, int jobs) {
  config.validate();
  TrainResult result;
  result.model = model;
  std::vector<const SftExample*> batch;
  result.log = run_loop(result.model, data.size(), config, "sft", [&](std::span<const std::size_t> idx) {
    batch.clear();
    for (std::size_t i : idx) batch.push_back(&data[i]);
    return sft_loss(result.model, batch, jobs);
  });
  result.pairs_used = static_cast<int>(data.size());
  return result;
}

}  // namespace fpo
