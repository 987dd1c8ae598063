#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpo/task.hpp"
#include "fpo/tokens.hpp"

namespace fpo {

enum class AlignOp : std::uint8_t { kMatch, kSubstitute, kInsert, kDelete };

// One alignment column. For kInsert, ref_index is the ref position the hyp
// token is inserted before; for kDelete, hyp_index is the hyp position the
// ref token is missing before.
struct AlignStep {
  AlignOp op = AlignOp::kMatch;
  std::size_t ref_index = 0;
  std::size_t hyp_index = 0;

  bool operator==(const AlignStep&) const = default;
};

struct AlignmentOps {
  std::vector<AlignStep> steps;

  std::size_t cost() const;
  // Rebuilds hyp from ref and the ops; throws InternalError if they disagree.
  TokenSeq replay(std::span<const TokenId> ref, std::span<const TokenId> hyp) const;
};

// Minimal unit-cost alignment. Among optimal alignments the traceback runs
// front to back preferring match > substitute > delete > insert, so
// insertions land after the longest matching prefix.
AlignmentOps align(std::span<const TokenId> ref, std::span<const TokenId> hyp);

// Classifies maximal non-match runs of the alignment:
//   inserted SILENCE run      -> abnormal_silence (>= 2) / unnatural_pause (1)
//   inserted copy of the tokens just before it -> repetition
//   deletions reaching the end of ref content  -> truncation at the cut
//   anything else             -> mispronunciation
// Spans index hyp.
std::vector<ErrorSpan> detect_spans(std::span<const TokenId> ref, std::span<const TokenId> hyp,
                                    const AlignmentOps& ops);

class IndicatorMask {
 public:
  IndicatorMask() = default;
  explicit IndicatorMask(std::size_t n) : bits_(n, 0) {}

  std::size_t size() const { return bits_.size(); }
  bool test(std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i) { bits_[i] = 1; }
  void set_range(std::size_t begin, std::size_t end);
  std::size_t count() const;
  bool any() const { return count() > 0; }
  bool is_suffix_from(std::size_t start) const;

  std::string to_bitstring() const;
  static IndicatorMask from_bitstring(const std::string& s);

  bool operator==(const IndicatorMask&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

// The indicator I(y^i); throws IndexError when i is out of range.
int indicator(const IndicatorMask& mask, std::size_t i);

// Temporal spans mark their own interval; a semantic-phonetic span marks
// everything from its start to the end of the sequence.
IndicatorMask mask_from_spans(std::size_t length, std::span<const ErrorSpan> spans);

struct MaskPolicy {
  // Build the winner mask from the winner's own spans instead of mapping the
  // loser's masked region onto the winner through the alignment.
  bool independent_winner_mask = false;
};

struct PairMasks {
  IndicatorMask winner;
  IndicatorMask loser;
  // Loser had no detected spans; excluded from fine-grained training.
  bool degenerate = false;
};

PairMasks build_masks(std::span<const TokenId> winner, std::span<const TokenId> loser,
                      std::span<const ErrorSpan> spans_l, std::span<const ErrorSpan> spans_w,
                      const MaskPolicy& policy = {});

// How the per-token terms of the fine-grained loss pair winner and loser
// positions.
enum class LengthPolicy : std::uint8_t {
  // Follow the winner/loser alignment over masked positions.
  kAligned,
  // Pair index i with index i for i < min length where the loser is masked.
  kIndexMin,
};

std::string_view length_policy_name(LengthPolicy p);
LengthPolicy length_policy_from_name(std::string_view name);

struct TokenPair {
  std::size_t winner = 0;
  std::size_t loser = 0;

  bool operator==(const TokenPair&) const = default;
};

std::vector<TokenPair> token_pairs(std::span<const TokenId> winner, std::span<const TokenId> loser,
                                   const PairMasks& masks, LengthPolicy policy);

struct PreferencePair {
  TokenSeq condition;
  TokenSeq reference;
  TokenSeq winner;
  TokenSeq loser;
  double score_w = 0.0;
  double score_l = 0.0;
  std::vector<ErrorSpan> spans_w;
  std::vector<ErrorSpan> spans_l;
  PairMasks masks;
};

// Aligns both candidates to the reference render, detects their spans and
// builds the masks.
PreferencePair annotate_pair(std::span<const TokenId> condition, std::span<const TokenId> reference,
                             std::span<const TokenId> winner, std::span<const TokenId> loser,
                             const MaskPolicy& policy = {});

}  // namespace fpo
