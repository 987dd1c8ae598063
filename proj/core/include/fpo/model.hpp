#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fpo/tokens.hpp"

namespace fpo {

// Only one architecture exists; the tag is stored so checkpoint files can be
// rejected if a future layout is introduced.
enum class Architecture : std::uint32_t {
  // h_t = tanh(E[x_t] + W h_{t-1} + b), logits = U h_t + c.
  kElmanTanh = 1,
};

std::string_view architecture_name(Architecture a);
Architecture architecture_from_name(std::string_view name);

struct ModelConfig {
  int vocab_size = 32;
  int hidden_dim = 48;
  int max_len = 40;
  Architecture architecture = Architecture::kElmanTanh;

  void validate() const;
  // 2*V*H + H*H + H + V for the Elman layout.
  std::size_t param_count() const;

  bool operator==(const ModelConfig&) const = default;
};

// Offsets of the named parameter blocks inside the flat vector.
// Matrices are row-major.
struct ParamLayout {
  std::size_t embed = 0;        // V x H input embedding
  std::size_t recurrent = 0;    // H x H
  std::size_t hidden_bias = 0;  // H
  std::size_t out_weight = 0;   // V x H
  std::size_t out_bias = 0;     // V
  std::size_t total = 0;

  static ParamLayout of(const ModelConfig& cfg);
};

struct ModelCheckpoint {
  ModelConfig config;
  std::vector<double> params;
  std::uint64_t rng_seed = 0;

  ParamLayout layout() const { return ParamLayout::of(config); }
  // Throws InternalError if the parameter count or finiteness invariant fails.
  void check_invariants() const;

  bool operator==(const ModelCheckpoint&) const = default;
};

// Natural-log probability of each realized output token, EOS included.
struct LogProbTrace {
  std::vector<double> values;

  double total() const;
  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

ModelCheckpoint init_model(const ModelConfig& config, std::uint64_t seed);

// Validates (condition, output) against the checkpoint: token range, trailing
// EOS with no interior EOS, combined length within max_len.
void validate_io(const ModelConfig& config, std::span<const TokenId> condition,
                 std::span<const TokenId> output);

LogProbTrace sequence_logprob(const ModelCheckpoint& ckpt, std::span<const TokenId> condition,
                              std::span<const TokenId> output);

// Full next-token log-distribution at every output position (row i is the
// distribution the model used to score output[i]).
std::vector<std::vector<double>> next_token_logprobs(const ModelCheckpoint& ckpt,
                                                     std::span<const TokenId> condition,
                                                     std::span<const TokenId> output);

// Gradient of sum_i weights[i] * log p(output_i | ...) added into `grad`.
// Returns the forward trace. `weights` must match the output length.
LogProbTrace accumulate_weighted_grad(const ModelCheckpoint& ckpt,
                                      std::span<const TokenId> condition,
                                      std::span<const TokenId> output,
                                      std::span<const double> weights, std::span<double> grad);

// Exact gradient of the summed LogProbTrace.
std::vector<double> grad_loglik(const ModelCheckpoint& ckpt, std::span<const TokenId> condition,
                                std::span<const TokenId> output);

struct SampleSettings {
  double temperature = 1.0;
  int top_k = 0;  // 0 means the full vocabulary
};

struct SamplingMeta {
  double temperature = 1.0;
  int top_k = 0;
  std::uint64_t seed = 0;
  int sample_index = 0;
  // Generation hit the length budget and EOS was forced.
  bool truncated = false;
};

struct GenSample {
  TokenSeq condition;
  TokenSeq output;
  SamplingMeta meta;
};

// Ancestral sampling with temperature and top-k (ties in the top-k cut keep
// the lower token id). Deterministic in all arguments.
GenSample sample(const ModelCheckpoint& ckpt, std::span<const TokenId> condition,
                 const SampleSettings& settings, std::uint64_t seed);

// Argmax decoding; ties resolve to the lowest token id.
TokenSeq greedy_decode(const ModelCheckpoint& ckpt, std::span<const TokenId> condition);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coords_checked = 0;
};

// Relative error is |a - n| / max(|a|, |n|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-5;

double relative_error(double analytic, double numeric);

// Central differences of `objective` against `analytic` on `coords` random
// coordinates of `params`. Shared by the model and loss checkers.
template <class Objective>
GradCheckReport finite_difference_check(std::vector<double> params,
                                        std::span<const double> analytic, Objective&& objective,
                                        double h, int coords, std::uint64_t seed);

GradCheckReport gradient_check(const ModelCheckpoint& ckpt, std::span<const TokenId> condition,
                               std::span<const TokenId> output, double h, int coords,
                               std::uint64_t seed = 0);

// FNV-1a over the raw parameter bytes.
std::uint64_t param_checksum(const ModelCheckpoint& ckpt);

// Checkpoint file: see docs/formats.md for the byte layout.
void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt,
                     std::uint64_t config_hash);
struct LoadedCheckpoint {
  ModelCheckpoint ckpt;
  std::uint64_t config_hash = 0;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace fpo

#include "fpo/detail/finite_difference.hpp"
