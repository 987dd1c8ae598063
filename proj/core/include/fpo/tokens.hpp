#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace fpo {

using TokenId = std::int32_t;

// Reserved ids shared by every vocabulary.
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kSilence = 3;
inline constexpr TokenId kFirstContent = 4;

// A sequence of vocabulary ids. Generated outputs end with kEos; text
// conditions carry no end marker (their length is explicit).
using TokenSeq = std::vector<TokenId>;

inline bool is_special(TokenId t) { return t == kPad || t == kBos || t == kEos; }

// Tokens that carry acoustic content, i.e. everything but PAD/BOS/EOS.
// SILENCE counts as content: it is a frame the model emits.
TokenSeq content_of(std::span<const TokenId> seq);

bool ends_with_eos(std::span<const TokenId> seq);

std::string to_string(std::span<const TokenId> seq);

}  // namespace fpo
