#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fpo/annotate.hpp"
#include "fpo/model.hpp"
#include "fpo/task.hpp"

namespace fpo {

enum class LossVariant : std::uint8_t {
  kFpoTokenSigmoid,     // sum of per-token logistic terms over masked pairs
  kFpoSequenceSigmoid,  // one logistic term on the masked ratio sums
  kDpoUtterance,        // one logistic term on the full ratio sums
};

enum class OptimizerKind : std::uint8_t { kSgd, kAdamW };

enum class TokenReduction : std::uint8_t {
  kSum,   // sum over masked token pairs, mean over sequence pairs
  kMean,  // mean over masked token pairs, mean over sequence pairs
};

enum class LrSchedule : std::uint8_t { kConstant, kLinearDecay };

std::string_view variant_name(LossVariant v);
LossVariant variant_from_name(std::string_view name);
std::string_view optimizer_name(OptimizerKind k);
OptimizerKind optimizer_from_name(std::string_view name);
std::string_view reduction_name(TokenReduction r);
TokenReduction reduction_from_name(std::string_view name);
std::string_view schedule_name(LrSchedule s);
LrSchedule schedule_from_name(std::string_view name);

struct TrainConfig {
  double beta = 0.1;
  double learning_rate = 1e-3;
  int batch_size = 16;
  int epochs = 4;
  OptimizerKind optimizer = OptimizerKind::kAdamW;
  LossVariant loss_variant = LossVariant::kFpoTokenSigmoid;
  LengthPolicy length_policy = LengthPolicy::kAligned;
  TokenReduction reduction = TokenReduction::kSum;
  LrSchedule schedule = LrSchedule::kConstant;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  // Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Numerically stable log(sigmoid(z)).
double log_sigmoid(double z);
double sigmoid(double z);

// Per-token log pi_theta - log pi_ref. The partition function cancels in every
// pairwise comparison, so it never appears.
std::vector<double> token_log_ratios(const LogProbTrace& theta, const LogProbTrace& ref);

// Loss of one preference pair as a function of the per-token ratios, with
// its derivative with respect to every ratio (equivalently every theta
// log-probability, the reference being frozen).
struct PairLoss {
  double loss = 0.0;
  std::vector<double> d_ratio_w;
  std::vector<double> d_ratio_l;
};

PairLoss dpo_pair_loss(std::span<const double> ratio_w, std::span<const double> ratio_l,
                       double beta);

PairLoss fpo_token_pair_loss(std::span<const double> ratio_w, std::span<const double> ratio_l,
                             std::span<const TokenPair> pairs, double beta,
                             TokenReduction reduction = TokenReduction::kSum);

// A pair with no masked tokens contributes exactly zero.
PairLoss fpo_sequence_pair_loss(std::span<const double> ratio_w, std::span<const double> ratio_l,
                                const PairMasks& masks, double beta);

// One pair ready for training: sequences, masks and the frozen reference
// traces.
struct PairBatchItem {
  const PreferencePair* pair = nullptr;
  LogProbTrace ref_w;
  LogProbTrace ref_l;
  std::vector<TokenPair> token_pairs;
};

PairBatchItem prepare_item(const PreferencePair& pair, const ModelCheckpoint& ref,
                           LengthPolicy policy);

struct BatchLoss {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d theta
};

// Mean over pairs of -log sigmoid(beta * (sum ratio_w - sum ratio_l)).
BatchLoss dpo_loss(const ModelCheckpoint& theta, std::span<const PairBatchItem> batch,
                   const TrainConfig& config, int jobs = 1);

// Fine-grained loss; config.loss_variant picks token or sequence sigmoid.
// Throws DegenerateBatchError if no pair in the batch has a masked token.
BatchLoss fpo_loss(const ModelCheckpoint& theta, std::span<const PairBatchItem> batch,
                   const TrainConfig& config, int jobs = 1);

// Dispatches on config.loss_variant.
BatchLoss preference_loss(const ModelCheckpoint& theta, std::span<const PairBatchItem> batch,
                          const TrainConfig& config, int jobs = 1);

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(std::span<double> params, std::span<const double> grad, double lr) = 0;
};

class Sgd final : public Optimizer {
 public:
  void step(std::span<double> params, std::span<const double> grad, double lr) override;
};

// Adam with decoupled weight decay.
class AdamW final : public Optimizer {
 public:
  AdamW(std::size_t n, double beta1, double beta2, double eps, double weight_decay);
  void step(std::span<double> params, std::span<const double> grad, double lr) override;

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_, weight_decay_;
  long t_ = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& config, std::size_t n);

struct StepLog {
  int step = 0;
  int epoch = 0;
  std::string variant;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  ModelCheckpoint model;
  std::vector<StepLog> log;
  int pairs_used = 0;
  int pairs_excluded = 0;  // degenerate pairs dropped by fine-grained variants
};

// Preference training of `policy` against the frozen `ref`.
TrainResult train(const ModelCheckpoint& policy, const ModelCheckpoint& ref,
                  std::span<const PreferencePair> data, const TrainConfig& config, int jobs = 1);

// Per-token negative log-likelihood of a batch and its gradient.
BatchLoss sft_loss(const ModelCheckpoint& model, std::span<const SftExample* const> batch,
                   int jobs = 1);

// Maximum-likelihood training. Uses batch_size, epochs, learning rate,
// optimizer, schedule, clip and seed from config.
TrainResult sft_train(const ModelCheckpoint& model, std::span<const SftExample> data,
                      const TrainConfig& config, int jobs = 1);

}  // namespace fpo
