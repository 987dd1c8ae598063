#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "fpo/error.hpp"
#include "fpo/model.hpp"

namespace fpo {
namespace {

constexpr std::array<char, 8> kMagic = {'F', 'P', 'O', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <class T>
  void le(T v) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double d) { le(std::bit_cast<std::uint64_t>(d)); }
  const std::vector<unsigned char>& data() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> buf) : buf_(std::move(buf)) {}
  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  template <class T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw InputError("checkpoint file truncated");
  }
  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a(const unsigned char* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt,
                     std::uint64_t config_hash) {
  ckpt.check_invariants();
  Writer w;
  w.bytes(kMagic.data(), kMagic.size());
  w.le(kFormatVersion);
  w.le(static_cast<std::uint32_t>(ckpt.config.architecture));
  w.le(static_cast<std::uint32_t>(ckpt.config.vocab_size));
  w.le(static_cast<std::uint32_t>(ckpt.config.hidden_dim));
  w.le(static_cast<std::uint32_t>(ckpt.config.max_len));
  w.le(ckpt.rng_seed);
  w.le(config_hash);
  w.le(static_cast<std::uint64_t>(ckpt.params.size()));
  const std::size_t payload_start = w.data().size();
  for (double p : ckpt.params) w.f64(p);
  w.le(fnv1a(w.data().data() + payload_start, w.data().size() - payload_start));

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  os.write(reinterpret_cast<const char*>(w.data().data()),
           static_cast<std::streamsize>(w.data().size()));
  if (!os) throw InputError("write failed for '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("missing checkpoint '" + path + "'");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  Reader r(std::move(buf));

  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw InputError("'" + path + "' is not a checkpoint file");
  const auto version = r.le<std::uint32_t>();
  if (version != kFormatVersion) {
    throw InputError("checkpoint format version " + std::to_string(version) +
                     " not supported (expected " + std::to_string(kFormatVersion) + ")");
  }
  LoadedCheckpoint out;
  ModelConfig& cfg = out.ckpt.config;
  cfg.architecture = static_cast<Architecture>(r.le<std::uint32_t>());
  cfg.vocab_size = static_cast<int>(r.le<std::uint32_t>());
  cfg.hidden_dim = static_cast<int>(r.le<std::uint32_t>());
  cfg.max_len = static_cast<int>(r.le<std::uint32_t>());
  out.ckpt.rng_seed = r.le<std::uint64_t>();
  out.config_hash = r.le<std::uint64_t>();
  const auto count = r.le<std::uint64_t>();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw InputError("checkpoint header invalid: " + std::string(e.what()));
  }
  if (count != cfg.param_count()) throw InputError("checkpoint parameter count mismatch");
  std::vector<unsigned char> raw(count * sizeof(double));
  r.bytes(raw.data(), raw.size());
  const std::uint64_t checksum = r.le<std::uint64_t>();
  if (checksum != fnv1a(raw.data(), raw.size())) throw InputError("checkpoint checksum mismatch");
  if (!r.at_end()) throw InputError("trailing bytes in checkpoint");
  Reader payload(std::move(raw));
  out.ckpt.params.resize(count);
  for (double& p : out.ckpt.params) p = payload.f64();
  out.ckpt.check_invariants();
  return out;
}

}  // namespace fpo
