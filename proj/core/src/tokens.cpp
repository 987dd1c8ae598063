#include "fpo/tokens.hpp"

#include <sstream>

namespace fpo {

TokenSeq content_of(std::span<const TokenId> seq) {
  TokenSeq out;
  out.reserve(seq.size());
  for (TokenId t : seq) {
    if (!is_special(t)) out.push_back(t);
  }
  return out;
}

bool ends_with_eos(std::span<const TokenId> seq) { return !seq.empty() && seq.back() == kEos; }

std::string to_string(std::span<const TokenId> seq) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) os << ',';
    os << seq[i];
  }
  os << ')';
  return os.str();
}

}  // namespace fpo
