#include "fpo/annotate.hpp"

#include <algorithm>
#include <limits>
#include <optional>

#include "fpo/error.hpp"

namespace fpo {

std::size_t AlignmentOps::cost() const {
  return static_cast<std::size_t>(std::count_if(
      steps.begin(), steps.end(), [](const AlignStep& s) { return s.op != AlignOp::kMatch; }));
}

TokenSeq AlignmentOps::replay(std::span<const TokenId> ref, std::span<const TokenId> hyp) const {
  TokenSeq out;
  std::size_t r = 0;
  for (const AlignStep& s : steps) {
    switch (s.op) {
      case AlignOp::kMatch:
        if (s.ref_index != r || s.ref_index >= ref.size()) throw InternalError("alignment replay: bad match");
        out.push_back(ref[r++]);
        break;
      case AlignOp::kSubstitute:
        if (s.ref_index != r || s.hyp_index >= hyp.size()) throw InternalError("alignment replay: bad substitute");
        out.push_back(hyp[s.hyp_index]);
        ++r;
        break;
      case AlignOp::kDelete:
        if (s.ref_index != r) throw InternalError("alignment replay: bad delete");
        ++r;
        break;
      case AlignOp::kInsert:
        if (s.hyp_index >= hyp.size()) throw InternalError("alignment replay: bad insert");
        out.push_back(hyp[s.hyp_index]);
        break;
    }
  }
  if (r != ref.size()) throw InternalError("alignment replay: ref not consumed");
  return out;
}

AlignmentOps align(std::span<const TokenId> ref, std::span<const TokenId> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  const std::size_t stride = m + 1;
  // cost[i * stride + j] = edit distance between ref[i..] and hyp[j..].
  std::vector<std::size_t> cost((n + 1) * stride);
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * stride + j]; };
  for (std::size_t j = 0; j <= m; ++j) at(n, j) = m - j;
  for (std::size_t i = n; i-- > 0;) {
    at(i, m) = n - i;
    for (std::size_t j = m; j-- > 0;) {
      at(i, j) = std::min({at(i + 1, j + 1) + (ref[i] == hyp[j] ? 0u : 1u), at(i + 1, j) + 1,
                           at(i, j + 1) + 1});
    }
  }

  AlignmentOps ops;
  ops.steps.reserve(n + m);
  std::size_t i = 0, j = 0;
  while (i < n || j < m) {
    const std::size_t here = at(i, j);
    if (i < n && j < m && ref[i] == hyp[j] && here == at(i + 1, j + 1)) {
      ops.steps.push_back({AlignOp::kMatch, i++, j++});
    } else if (i < n && j < m && ref[i] != hyp[j] && here == at(i + 1, j + 1) + 1) {
      ops.steps.push_back({AlignOp::kSubstitute, i++, j++});
    } else if (i < n && here == at(i + 1, j) + 1) {
      ops.steps.push_back({AlignOp::kDelete, i++, j});
    } else {
      ops.steps.push_back({AlignOp::kInsert, i, j++});
    }
  }
  return ops;
}

namespace {

// Finds a placement of the inserted block [s, e) that copies the tokens right
// before it. An inserted block can slide over positions where the token
// leaving equals the token entering without changing the alignment cost.
std::optional<std::size_t> repetition_start(std::span<const TokenId> hyp, std::size_t s, std::size_t e) {
  const std::size_t len = e - s;
  std::size_t lo = s, hi = s;
  while (lo > 0 && hyp[lo - 1] == hyp[lo - 1 + len]) --lo;
  while (hi + len < hyp.size() && hyp[hi] == hyp[hi + len]) ++hi;
  std::optional<std::size_t> best;
  for (std::size_t p = lo; p <= hi; ++p) {
    if (p < len) continue;
    if (!std::equal(hyp.begin() + static_cast<std::ptrdiff_t>(p - len),
                    hyp.begin() + static_cast<std::ptrdiff_t>(p),
                    hyp.begin() + static_cast<std::ptrdiff_t>(p))) {
      continue;
    }
    const auto dist = [&](std::size_t q) { return q > s ? q - s : s - q; };
    if (!best || dist(p) < dist(*best)) best = p;
  }
  return best;
}

}  // namespace

std::vector<ErrorSpan> detect_spans(std::span<const TokenId> ref, std::span<const TokenId> hyp,
                                    const AlignmentOps& ops) {
  if (ops.replay(ref, hyp) != TokenSeq(hyp.begin(), hyp.end())) {
    throw InternalError("alignment does not reproduce hyp");
  }
  const std::size_t ref_content_end = ends_with_eos(ref) ? ref.size() - 1 : ref.size();
  std::vector<ErrorSpan> spans;
  const auto& steps = ops.steps;
  for (std::size_t a = 0; a < steps.size();) {
    if (steps[a].op == AlignOp::kMatch) {
      ++a;
      continue;
    }
    std::size_t b = a;
    bool has_sub = false, has_ins = false, has_del = false, reaches_end = false;
    std::size_t hyp_lo = std::numeric_limits<std::size_t>::max();
    std::size_t hyp_hi = 0;  // one past the last hyp token touched by sub/ins
    for (; b < steps.size() && steps[b].op != AlignOp::kMatch; ++b) {
      const AlignStep& s = steps[b];
      hyp_lo = std::min(hyp_lo, s.hyp_index);
      switch (s.op) {
        case AlignOp::kSubstitute:
          has_sub = true;
          hyp_hi = std::max(hyp_hi, s.hyp_index + 1);
          break;
        case AlignOp::kInsert:
          has_ins = true;
          hyp_hi = std::max(hyp_hi, s.hyp_index + 1);
          break;
        case AlignOp::kDelete:
          has_del = true;
          if (ref_content_end > 0 && s.ref_index == ref_content_end - 1) reaches_end = true;
          break;
        case AlignOp::kMatch:
          break;
      }
    }

    auto clamp_start = [&](std::size_t x) { return std::min(x, hyp.size() - 1); };
    if (has_del && reaches_end) {
      const std::size_t start = clamp_start(hyp_lo);
      spans.push_back({start, start + 1, ErrorKind::kTruncation});
    } else if (has_ins && !has_sub && !has_del) {
      const std::size_t s = hyp_lo, e = hyp_hi;
      const bool silent = std::all_of(hyp.begin() + static_cast<std::ptrdiff_t>(s),
                                      hyp.begin() + static_cast<std::ptrdiff_t>(e),
                                      [](TokenId t) { return t == kSilence; });
      if (silent) {
        spans.push_back({s, e, e - s >= 2 ? ErrorKind::kAbnormalSilence : ErrorKind::kUnnaturalPause});
      } else if (auto p = repetition_start(hyp, s, e)) {
        spans.push_back({*p, *p + (e - s), ErrorKind::kRepetition});
      } else {
        spans.push_back({s, e, ErrorKind::kMispronunciation});
      }
    } else {
      const std::size_t start = clamp_start(hyp_lo);
      const std::size_t end = std::max(start + 1, std::min(hyp_hi, hyp.size()));
      spans.push_back({start, end, ErrorKind::kMispronunciation});
    }
    a = b;
  }
  // Sliding a repetition can move it next to a neighbouring span; keep the
  // output sorted and disjoint.
  std::sort(spans.begin(), spans.end(),
            [](const ErrorSpan& x, const ErrorSpan& y) { return x.start < y.start; });
  for (std::size_t k = 1; k < spans.size(); ++k) {
    if (spans[k].start < spans[k - 1].end) spans[k].start = spans[k - 1].end;
  }
  std::erase_if(spans, [](const ErrorSpan& s) { return s.start >= s.end; });
  return spans;
}

void IndicatorMask::set_range(std::size_t begin, std::size_t end) {
  end = std::min(end, bits_.size());
  for (std::size_t i = begin; i < end; ++i) bits_[i] = 1;
}

std::size_t IndicatorMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool IndicatorMask::is_suffix_from(std::size_t start) const {
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if ((bits_[i] != 0) != (i >= start)) return false;
  }
  return true;
}

std::string IndicatorMask::to_bitstring() const {
  std::string s(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) s[i] = '1';
  }
  return s;
}

IndicatorMask IndicatorMask::from_bitstring(const std::string& s) {
  IndicatorMask m(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '1') {
      m.set(i);
    } else if (s[i] != '0') {
      throw InputError("mask bitstring may only contain 0 and 1");
    }
  }
  return m;
}

int indicator(const IndicatorMask& mask, std::size_t i) {
  if (i >= mask.size()) {
    throw IndexError("indicator index " + std::to_string(i) + " out of range for mask of length " +
                     std::to_string(mask.size()));
  }
  return mask.test(i) ? 1 : 0;
}

IndicatorMask mask_from_spans(std::size_t length, std::span<const ErrorSpan> spans) {
  IndicatorMask mask(length);
  std::size_t onset = length;
  for (const ErrorSpan& s : spans) {
    if (s.start >= s.end || s.end > length) throw PreconditionError("span outside sequence");
    if (s.category() == ErrorCategory::kSemanticPhonetic) {
      onset = std::min(onset, s.start);
    } else {
      mask.set_range(s.start, s.end);
    }
  }
  mask.set_range(onset, length);
  return mask;
}

PairMasks build_masks(std::span<const TokenId> winner, std::span<const TokenId> loser,
                      std::span<const ErrorSpan> spans_l, std::span<const ErrorSpan> spans_w,
                      const MaskPolicy& policy) {
  PairMasks out;
  out.loser = mask_from_spans(loser.size(), spans_l);
  out.degenerate = spans_l.empty();
  if (policy.independent_winner_mask) {
    out.winner = mask_from_spans(winner.size(), spans_w);
    return out;
  }
  out.winner = IndicatorMask(winner.size());
  if (winner.empty() || loser.empty()) return out;
  const std::size_t last_w = winner.size() - 1;
  const std::size_t last_l = loser.size() - 1;
  for (const AlignStep& s : align(winner, loser).steps) {
    switch (s.op) {
      case AlignOp::kMatch:
      case AlignOp::kSubstitute:
        if (out.loser.test(s.hyp_index)) out.winner.set(s.ref_index);
        break;
      case AlignOp::kInsert:
        if (out.loser.test(s.hyp_index)) out.winner.set(std::min(s.ref_index, last_w));
        break;
      case AlignOp::kDelete:
        if (out.loser.test(std::min(s.hyp_index, last_l))) out.winner.set(s.ref_index);
        break;
    }
  }
  return out;
}

std::string_view length_policy_name(LengthPolicy p) {
  return p == LengthPolicy::kAligned ? "aligned" : "index_min";
}

LengthPolicy length_policy_from_name(std::string_view name) {
  if (name == "aligned") return LengthPolicy::kAligned;
  if (name == "index_min") return LengthPolicy::kIndexMin;
  throw ConfigError("unknown length_policy '" + std::string(name) + "'");
}

std::vector<TokenPair> token_pairs(std::span<const TokenId> winner, std::span<const TokenId> loser,
                                   const PairMasks& masks, LengthPolicy policy) {
  if (masks.winner.size() != winner.size() || masks.loser.size() != loser.size()) {
    throw InternalError("mask length does not match sequence length");
  }
  std::vector<TokenPair> pairs;
  if (winner.empty() || loser.empty()) return pairs;
  if (policy == LengthPolicy::kIndexMin) {
    const std::size_t n = std::min(winner.size(), loser.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (masks.loser.test(i)) pairs.push_back({i, i});
    }
    return pairs;
  }
  const std::size_t last_w = winner.size() - 1;
  const std::size_t last_l = loser.size() - 1;
  for (const AlignStep& s : align(winner, loser).steps) {
    switch (s.op) {
      case AlignOp::kMatch:
      case AlignOp::kSubstitute:
        if (masks.loser.test(s.hyp_index)) pairs.push_back({s.ref_index, s.hyp_index});
        break;
      case AlignOp::kInsert:
        if (masks.loser.test(s.hyp_index)) pairs.push_back({std::min(s.ref_index, last_w), s.hyp_index});
        break;
      case AlignOp::kDelete:
        if (masks.winner.test(s.ref_index)) pairs.push_back({s.ref_index, std::min(s.hyp_index, last_l)});
        break;
    }
  }
  return pairs;
}

PreferencePair annotate_pair(std::span<const TokenId> condition, std::span<const TokenId> reference,
                             std::span<const TokenId> winner, std::span<const TokenId> loser,
                             const MaskPolicy& policy) {
  PreferencePair p;
  p.condition.assign(condition.begin(), condition.end());
  p.reference.assign(reference.begin(), reference.end());
  p.winner.assign(winner.begin(), winner.end());
  p.loser.assign(loser.begin(), loser.end());
  p.spans_w = detect_spans(reference, winner, align(reference, winner));
  p.spans_l = detect_spans(reference, loser, align(reference, loser));
  p.masks = build_masks(winner, loser, p.spans_l, p.spans_w, policy);
  return p;
}

}  // namespace fpo
