#include "fpo/task.hpp"

#include <algorithm>
#include <string>

#include "fpo/error.hpp"

namespace fpo {

std::string_view kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::kMispronunciation:
      return "mispronunciation";
    case ErrorKind::kAbnormalSilence:
      return "abnormal_silence";
    case ErrorKind::kUnnaturalPause:
      return "unnatural_pause";
    case ErrorKind::kRepetition:
      return "repetition";
    case ErrorKind::kTruncation:
      return "truncation";
  }
  return "unknown";
}

ErrorKind kind_from_name(std::string_view name) {
  for (ErrorKind k : kAllErrorKinds) {
    if (kind_name(k) == name) return k;
  }
  throw ConfigError("unknown error kind '" + std::string(name) + "'");
}

std::string_view category_name(ErrorCategory c) {
  return c == ErrorCategory::kTemporal ? "temporal" : "semantic_phonetic";
}

void InjectionConfig::validate() const {
  auto range = [](int lo, int hi, const char* what) {
    if (lo < 1 || hi < lo) throw ConfigError(std::string("invalid ") + what + " width range");
  };
  range(substitution_min, substitution_max, "substitution");
  range(silence_min, silence_max, "silence");
  range(pause_min, pause_max, "pause");
  range(repetition_min, repetition_max, "repetition");
  if (content_end != 0 && content_end < kFirstContent + 2) {
    throw ConfigError("content_end leaves no substitute tokens");
  }
}

std::size_t TaskSpec::max_render_len() const {
  std::size_t longest = 0;
  for (const auto& phrase : token_map) longest = std::max(longest, phrase.size());
  return static_cast<std::size_t>(max_text_len) * longest + 1;
}

void TaskSpec::validate(int model_max_len) const {
  if (text_vocab < 2) throw ConfigError("text_vocab must be >= 2 (phrase break and a word)");
  if (text_base() < kFirstContent + 2) throw ConfigError("vocabulary too small for the task");
  if (static_cast<int>(token_map.size()) != text_vocab) {
    throw ConfigError("token_map must cover every text symbol");
  }
  for (const auto& phrase : token_map) {
    if (phrase.empty() || phrase.size() > 3) throw ConfigError("token_map phrases must have 1-3 tokens");
    for (TokenId t : phrase) {
      if (t < kSilence || t >= text_base()) throw ConfigError("token_map entry outside output range");
    }
  }
  if (min_words < 1 || max_text_len < min_words) throw ConfigError("invalid text length range");
  if (pause_prob < 0.0 || pause_prob > 1.0) throw ConfigError("pause_prob must be in [0, 1]");
  injection.validate();
  for (TokenId t : injection.confusion) {
    if (t < 0 || t >= vocab_size) throw ConfigError("confusion entry outside vocabulary");
  }
  if (static_cast<std::size_t>(max_text_len) + max_render_len() >
      static_cast<std::size_t>(model_max_len)) {
    throw ConfigError("longest text plus its render exceeds the model max_len");
  }
}

TaskSpec make_task(int vocab_size, int text_vocab, int min_words, int max_text_len,
                   double pause_prob, std::uint64_t seed) {
  TaskSpec spec;
  spec.vocab_size = vocab_size;
  spec.text_vocab = text_vocab;
  spec.min_words = min_words;
  spec.max_text_len = max_text_len;
  spec.pause_prob = pause_prob;
  spec.seed = seed;
  spec.injection.content_end = spec.text_base();
  if (spec.text_base() < kFirstContent + 2) throw ConfigError("vocabulary too small for the task");

  Rng rng(derive_seed(seed, "token_map"));
  spec.token_map.push_back({kSilence});
  const auto lo = static_cast<std::int64_t>(kFirstContent);
  const auto hi = static_cast<std::int64_t>(spec.text_base()) - 1;
  for (int s = 1; s < text_vocab; ++s) {
    TokenSeq phrase;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) throw ConfigError("cannot draw distinct phrases for token_map");
      const auto len = static_cast<std::size_t>(uniform_int(rng, 1, 3));
      phrase.clear();
      while (phrase.size() < len) {
        const auto t = static_cast<TokenId>(uniform_int(rng, lo, hi));
        if (std::find(phrase.begin(), phrase.end(), t) == phrase.end()) phrase.push_back(t);
      }
      if (std::find(spec.token_map.begin(), spec.token_map.end(), phrase) == spec.token_map.end()) break;
    }
    spec.token_map.push_back(phrase);
  }
  return spec;
}

TokenSeq random_text(const TaskSpec& spec, Rng& rng) {
  const auto words = static_cast<int>(uniform_int(rng, spec.min_words, spec.max_text_len));
  int pause_budget = spec.max_text_len - words;
  TokenSeq text;
  int prev = -1;
  for (int w = 0; w < words; ++w) {
    if (w > 0 && pause_budget > 0 && uniform01(rng) < spec.pause_prob) {
      text.push_back(spec.text_id(0));
      --pause_budget;
    }
    int sym;
    do {
      sym = static_cast<int>(uniform_int(rng, 1, spec.text_vocab - 1));
    } while (sym == prev && spec.text_vocab > 2);
    text.push_back(spec.text_id(sym));
    prev = sym;
  }
  return text;
}

TokenSeq reference_render(const TaskSpec& spec, std::span<const TokenId> text) {
  if (text.size() > static_cast<std::size_t>(spec.max_text_len)) {
    throw DomainError("text longer than max_text_len");
  }
  TokenSeq out;
  for (TokenId t : text) {
    const int sym = t - spec.text_base();
    if (sym < 0 || sym >= spec.text_vocab) {
      throw DomainError("text symbol " + std::to_string(t) + " outside text vocabulary");
    }
    const auto& phrase = spec.token_map[static_cast<std::size_t>(sym)];
    out.insert(out.end(), phrase.begin(), phrase.end());
  }
  out.push_back(kEos);
  return out;
}

namespace {

TokenSeq apply_edit(std::span<const TokenId> seq, const Edit& e) {
  TokenSeq out(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(e.pos));
  out.insert(out.end(), e.inserted.begin(), e.inserted.end());
  out.insert(out.end(), seq.begin() + static_cast<std::ptrdiff_t>(e.pos + e.removed.size()),
             seq.end());
  return out;
}

int draw_width(Rng& rng, int lo, int hi, std::size_t cap) {
  const int top = std::min(hi, static_cast<int>(cap));
  if (top < lo) throw InjectionError("sequence too short for the requested error width");
  return static_cast<int>(uniform_int(rng, lo, top));
}

}  // namespace

CorruptedSample inject_error(std::span<const TokenId> clean, ErrorKind kind, std::uint64_t seed,
                             const InjectionConfig& cfg) {
  const std::size_t n = clean.empty() ? 0 : clean.size() - 1;
  return inject_error_at(clean, kind, {0, n}, seed, cfg);
}

CorruptedSample inject_error_at(std::span<const TokenId> clean, ErrorKind kind, InjectionSite site,
                                std::uint64_t seed, const InjectionConfig& cfg) {
  if (!ends_with_eos(clean)) throw MalformedSequenceError("clean sequence must end with EOS");
  const std::size_t n = clean.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_special(clean[i])) throw MalformedSequenceError("special token inside clean sequence");
  }
  if (site.begin > site.end || site.end > n) throw PreconditionError("injection site outside the sequence");
  auto need = [&](std::size_t k) {
    if (n < k) {
      throw InjectionError(std::string(kind_name(kind)) + " needs at least " + std::to_string(k) +
                           " content tokens");
    }
  };
  auto pick = [](Rng& rng, std::size_t lo, std::size_t hi) {
    return static_cast<std::size_t>(
        uniform_int(rng, static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
  };
  const std::size_t site_len = site.end - site.begin;

  Rng rng(seed);
  Edit e;
  e.kind = kind;
  switch (kind) {
    case ErrorKind::kMispronunciation: {
      need(3);
      TokenId hi = cfg.content_end;
      if (hi == 0) hi = std::max<TokenId>(*std::max_element(clean.begin(), clean.end() - 1) + 1,
                                          kFirstContent + 2);
      const int width = draw_width(rng, cfg.substitution_min, cfg.substitution_max, site_len);
      e.pos = pick(rng, site.begin, site.end - static_cast<std::size_t>(width));
      e.removed.assign(clean.begin() + static_cast<std::ptrdiff_t>(e.pos),
                       clean.begin() + static_cast<std::ptrdiff_t>(e.pos) + width);
      for (TokenId original : e.removed) {
        const auto o = static_cast<std::size_t>(original);
        if (o < cfg.confusion.size() && cfg.confusion[o] != original) {
          e.inserted.push_back(cfg.confusion[o]);
          continue;
        }
        TokenId t;
        do {
          t = static_cast<TokenId>(uniform_int(rng, kFirstContent, hi - 1));
        } while (t == original);
        e.inserted.push_back(t);
      }
      break;
    }
    case ErrorKind::kAbnormalSilence: {
      need(1);
      const int width = static_cast<int>(uniform_int(rng, cfg.silence_min, cfg.silence_max));
      e.pos = pick(rng, site.begin, site.end);
      e.inserted.assign(static_cast<std::size_t>(width), kSilence);
      break;
    }
    case ErrorKind::kUnnaturalPause: {
      // Phrase-internal: between two non-silence tokens.
      std::vector<std::size_t> slots;
      for (std::size_t p = std::max<std::size_t>(1, site.begin); p < n && p <= site.end; ++p) {
        if (clean[p - 1] != kSilence && clean[p] != kSilence) slots.push_back(p);
      }
      if (slots.empty()) throw InjectionError("no phrase-internal position for a pause");
      const int width = static_cast<int>(uniform_int(rng, cfg.pause_min, cfg.pause_max));
      e.pos = slots[pick(rng, 0, slots.size() - 1)];
      e.inserted.assign(static_cast<std::size_t>(width), kSilence);
      break;
    }
    case ErrorKind::kRepetition: {
      need(3);
      if (site_len == 0) throw InjectionError("empty injection site");
      const auto width = static_cast<std::size_t>(draw_width(rng, cfg.repetition_min, cfg.repetition_max, site.end));
      // The copied span ends inside the site; it starts inside it when it fits.
      const std::size_t hi = site.end - width;
      const std::size_t lo = std::min(site.begin, hi);
      const std::size_t start = pick(rng, lo, hi);
      e.pos = start + width;
      e.inserted.assign(clean.begin() + static_cast<std::ptrdiff_t>(start),
                        clean.begin() + static_cast<std::ptrdiff_t>(e.pos));
      break;
    }
    case ErrorKind::kTruncation: {
      need(3);
      const std::size_t lo = std::max<std::size_t>(1, site.begin);
      const std::size_t hi = std::min(n - 1, site.end == 0 ? 0 : site.end - 1);
      if (lo > hi) throw InjectionError("no truncation point inside the injection site");
      e.pos = pick(rng, lo, hi);
      e.removed.assign(clean.begin() + static_cast<std::ptrdiff_t>(e.pos), clean.end() - 1);
      break;
    }
  }

  CorruptedSample out;
  out.clean.assign(clean.begin(), clean.end());
  out.corrupted = apply_edit(clean, e);
  const std::size_t width = kind == ErrorKind::kTruncation ? 1 : e.inserted.size();
  out.injected_spans.push_back({e.pos, e.pos + width, kind});
  out.edits.push_back(std::move(e));
  return out;
}

TokenSeq revert(const CorruptedSample& sample) {
  TokenSeq seq = sample.corrupted;
  for (auto it = sample.edits.rbegin(); it != sample.edits.rend(); ++it) {
    Edit undo;
    undo.pos = it->pos;
    undo.removed = it->inserted;
    undo.inserted = it->removed;
    if (undo.pos + undo.removed.size() > seq.size()) throw InternalError("edit log out of range");
    seq = apply_edit(seq, undo);
  }
  return seq;
}

std::vector<SftExample> make_sft_dataset(const TaskSpec& spec, int n, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("dataset size must be >= 1");
  std::vector<SftExample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    SftExample ex;
    ex.text = random_text(spec, rng);
    ex.target = reference_render(spec, ex.text);
    out.push_back(std::move(ex));
  }
  return out;
}

void CorruptionProfile::validate(const TaskSpec& spec) const {
  if (rate < 0.0 || rate > 1.0) throw ConfigError("corruption rate must be in [0, 1]");
  if (rate > 0.0 && kinds.empty()) throw ConfigError("corruption needs at least one error kind");
  for (int w : hard_words) {
    if (w < 1 || w >= spec.text_vocab) throw ConfigError("hard word outside the word symbols");
  }
  for (std::size_t t = 0; t < confusion.size(); ++t) {
    if (confusion[t] < 0 || confusion[t] >= spec.vocab_size) throw ConfigError("confusion entry outside vocabulary");
  }
}

CorruptionProfile hard_word_profile(const TaskSpec& spec, double rate, int n_hard, std::uint64_t seed) {
  if (n_hard < 1 || n_hard > spec.text_vocab - 1) throw ConfigError("hard word count outside [1, words]");
  Rng rng(derive_seed(seed, "hard_words"));
  std::vector<int> words(static_cast<std::size_t>(spec.text_vocab - 1));
  for (std::size_t i = 0; i < words.size(); ++i) words[i] = static_cast<int>(i) + 1;
  std::shuffle(words.begin(), words.end(), rng);
  CorruptionProfile p;
  p.rate = rate;
  p.hard_words.assign(words.begin(), words.begin() + n_hard);
  std::sort(p.hard_words.begin(), p.hard_words.end());

  // Cyclic shift of a shuffled content range: every id maps elsewhere.
  std::vector<TokenId> ids;
  for (TokenId t = kFirstContent; t < spec.text_base(); ++t) ids.push_back(t);
  std::shuffle(ids.begin(), ids.end(), rng);
  p.confusion.resize(static_cast<std::size_t>(spec.vocab_size));
  for (std::size_t t = 0; t < p.confusion.size(); ++t) p.confusion[t] = static_cast<TokenId>(t);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    p.confusion[static_cast<std::size_t>(ids[i])] = ids[(i + 1) % ids.size()];
  }
  return p;
}

namespace {

// Token interval of the first hard word in the text, if any.
std::optional<InjectionSite> hard_site(const TaskSpec& spec, std::span<const TokenId> text,
                                       std::span<const int> hard_words) {
  std::size_t pos = 0;
  for (TokenId t : text) {
    const int sym = t - spec.text_base();
    const std::size_t len = spec.token_map[static_cast<std::size_t>(sym)].size();
    if (std::find(hard_words.begin(), hard_words.end(), sym) != hard_words.end()) {
      return InjectionSite{pos, pos + len};
    }
    pos += len;
  }
  return std::nullopt;
}

}  // namespace

std::vector<SftExample> corrupt_dataset(const TaskSpec& spec, std::vector<SftExample> data,
                                        const CorruptionProfile& profile, std::uint64_t seed) {
  profile.validate(spec);
  InjectionConfig cfg = spec.injection;
  if (!profile.confusion.empty()) cfg.confusion = profile.confusion;
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::optional<InjectionSite> site = InjectionSite{0, data[i].target.size() - 1};
    if (!profile.hard_words.empty()) site = hard_site(spec, data[i].text, profile.hard_words);
    if (!site) continue;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    if (!(uniform01(rng) < profile.rate)) continue;
    const ErrorKind kind = profile.kinds[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<std::int64_t>(profile.kinds.size()) - 1))];
    try {
      CorruptedSample c = inject_error_at(data[i].target, kind, *site, rng(), cfg);
      data[i].target = std::move(c.corrupted);
      data[i].spans = std::move(c.injected_spans);
    } catch (const InjectionError&) {
      // Too short for this kind; the item stays clean.
    }
  }
  return data;
}

}  // namespace fpo
