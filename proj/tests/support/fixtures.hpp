#pragma once

// Small model and preference-pair fixtures shared by the loss tests and the
// acceptance suite.

#include <vector>

#include "fpo/annotate.hpp"
#include "fpo/error.hpp"
#include "fpo/model.hpp"
#include "fpo/task.hpp"

namespace fixtures {

using namespace fpo;

inline constexpr ModelConfig kSmall{24, 8, 30, Architecture::kElmanTanh};

inline TaskSpec small_task() { return make_task(kSmall.vocab_size, 4, 1, 4, 0.3, 17); }

// Clean render as winner, an injected copy as loser.
inline PreferencePair make_pair(const TaskSpec& spec, Rng& rng, ErrorKind kind) {
  for (;;) {
    const TokenSeq text = random_text(spec, rng);
    const TokenSeq ref = reference_render(spec, text);
    try {
      const CorruptedSample bad = inject_error(ref, kind, rng(), spec.injection);
      if (bad.corrupted.size() + text.size() > static_cast<std::size_t>(kSmall.max_len)) continue;
      PreferencePair p = annotate_pair(text, ref, ref, bad.corrupted);
      if (!p.masks.degenerate) return p;
    } catch (const InjectionError&) {
    }
  }
}

inline std::vector<PreferencePair> make_pairs(int n, std::uint64_t seed) {
  const TaskSpec spec = small_task();
  Rng rng(seed);
  std::vector<PreferencePair> out;
  for (int i = 0; i < n; ++i) out.push_back(make_pair(spec, rng, kAllErrorKinds[static_cast<std::size_t>(i) % 5]));
  return out;
}

}  // namespace fixtures
