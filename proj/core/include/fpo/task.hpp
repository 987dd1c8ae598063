#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fpo/rng.hpp"
#include "fpo/tokens.hpp"

namespace fpo {

enum class ErrorKind : std::uint8_t {
  kMispronunciation,
  kAbnormalSilence,
  kUnnaturalPause,
  kRepetition,
  kTruncation,
};

inline constexpr std::array<ErrorKind, 5> kAllErrorKinds = {
    ErrorKind::kMispronunciation, ErrorKind::kAbnormalSilence, ErrorKind::kUnnaturalPause,
    ErrorKind::kRepetition, ErrorKind::kTruncation};

enum class ErrorCategory : std::uint8_t {
  kTemporal,
  kSemanticPhonetic,
};

constexpr ErrorCategory category_of(ErrorKind k) {
  return (k == ErrorKind::kRepetition || k == ErrorKind::kTruncation)
             ? ErrorCategory::kSemanticPhonetic
             : ErrorCategory::kTemporal;
}

std::string_view kind_name(ErrorKind k);
ErrorKind kind_from_name(std::string_view name);
std::string_view category_name(ErrorCategory c);

// Half-open token interval [start, end) of one sequence.
struct ErrorSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  ErrorKind kind = ErrorKind::kMispronunciation;

  ErrorCategory category() const { return category_of(kind); }
  bool operator==(const ErrorSpan&) const = default;
};

// Span widths drawn by the injectors, inclusive ranges.
struct InjectionConfig {
  int substitution_min = 1, substitution_max = 3;
  int silence_min = 2, silence_max = 5;
  int pause_min = 1, pause_max = 1;
  int repetition_min = 2, repetition_max = 5;
  // Substitutes are drawn from [kFirstContent, content_end) minus SILENCE.
  // 0 derives the bound from the largest id in the clean sequence.
  TokenId content_end = 0;
  // Fixed substitute per token id for mispronunciations; empty draws them
  // at random.
  std::vector<TokenId> confusion;

  void validate() const;
};

struct TaskSpec {
  // Model vocabulary the task lives in. Output content ids are
  // [kFirstContent, text_base()); text symbols occupy the top text_vocab ids.
  int vocab_size = 32;
  // Symbol 0 is the phrase break; it renders to a single SILENCE.
  int text_vocab = 6;
  // Rendering of each text symbol (1-3 output tokens).
  std::vector<TokenSeq> token_map;
  int min_words = 2;
  int max_text_len = 5;
  double pause_prob = 0.3;
  std::uint64_t seed = 0;
  InjectionConfig injection;

  TokenId text_base() const { return static_cast<TokenId>(vocab_size - text_vocab); }
  TokenId text_id(int symbol) const { return text_base() + symbol; }
  // Longest possible rendering, EOS included.
  std::size_t max_render_len() const;
  // Checks internal consistency and that every render fits in max_len
  // (condition + output).
  void validate(int model_max_len) const;
};

// Builds a TaskSpec whose token_map is drawn from `seed`: symbol 0 maps to
// SILENCE, every word symbol to a distinct phrase of 1-3 content tokens.
TaskSpec make_task(int vocab_size, int text_vocab, int min_words, int max_text_len,
                   double pause_prob, std::uint64_t seed);

// Random text: words with no immediate repeats, optional phrase breaks between
// words, never leading or trailing.
TokenSeq random_text(const TaskSpec& spec, Rng& rng);

TokenSeq reference_render(const TaskSpec& spec, std::span<const TokenId> text);

// A single localized edit: corrupted = clean[0, pos) + inserted +
// clean[pos + removed.size(), ...). Positions are token indices.
struct Edit {
  ErrorKind kind = ErrorKind::kMispronunciation;
  std::size_t pos = 0;
  TokenSeq removed;
  TokenSeq inserted;
};

struct CorruptedSample {
  TokenSeq clean;
  TokenSeq corrupted;
  std::vector<ErrorSpan> injected_spans;  // indices into corrupted
  std::vector<Edit> edits;
};

CorruptedSample inject_error(std::span<const TokenId> clean, ErrorKind kind, std::uint64_t seed,
                             const InjectionConfig& cfg = {});

// Clean-sequence token interval [begin, end) that must host the error.
struct InjectionSite {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// As inject_error, with the edit confined to the site: substitutions inside
// it, insertions at its boundaries or inside, a repeated span ending inside
// it, a truncation cut inside it.
CorruptedSample inject_error_at(std::span<const TokenId> clean, ErrorKind kind, InjectionSite site,
                                std::uint64_t seed, const InjectionConfig& cfg = {});

// Undoes the recorded edits, reading only `corrupted` and the edit log.
TokenSeq revert(const CorruptedSample& sample);

struct SftExample {
  TokenSeq text;
  TokenSeq target;
  std::vector<ErrorSpan> spans;  // non-empty only for corrupted targets
};

std::vector<SftExample> make_sft_dataset(const TaskSpec& spec, int n, std::uint64_t seed);

struct CorruptionProfile {
  double rate = 0.0;
  std::vector<ErrorKind> kinds{kAllErrorKinds.begin(), kAllErrorKinds.end()};
  // Text symbols whose rendering hosts every error. Empty places errors
  // anywhere and corrupts any item; otherwise only items containing a hard
  // word are eligible.
  std::vector<int> hard_words;
  // Overrides spec.injection.confusion when non-empty.
  std::vector<TokenId> confusion;

  void validate(const TaskSpec& spec) const;
};

// Picks n_hard word symbols and a confusion table (a derangement of the
// content ids) from the seed.
CorruptionProfile hard_word_profile(const TaskSpec& spec, double rate, int n_hard,
                                    std::uint64_t seed);

// Replaces a `rate` fraction of eligible targets (chosen independently per
// item) with a single injected error of a kind drawn uniformly from
// profile.kinds.
std::vector<SftExample> corrupt_dataset(const TaskSpec& spec, std::vector<SftExample> data,
                                        const CorruptionProfile& profile, std::uint64_t seed);

}  // namespace fpo
