#include "fpo/rng.hpp"

#include "fpo/error.hpp"

namespace fpo {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t parent, std::string_view stream) {
  // FNV-1a over the label, folded with the parent.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix(parent ^ splitmix(h));
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return splitmix(parent ^ splitmix(index + 0x632be59bd9b4e019ULL));
}

std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw InternalError("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(rng());
  // Reject the low (2^64 mod span) draws so the modulus is unbiased.
  const std::uint64_t threshold = (0 - span) % span;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw < threshold);
  return lo + static_cast<std::int64_t>(draw % span);
}

}  // namespace fpo
