#include "fvlab/rng.hpp"

namespace fvlab {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) noexcept {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Philox4x32::Philox4x32(std::uint64_t seed, std::uint64_t stream_id) noexcept
    : seed_(seed), stream_(stream_id) {}

Philox4x32::Block Philox4x32::encrypt(Block ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

void Philox4x32::refill() noexcept {
  const Block ctr{static_cast<std::uint32_t>(block_index_),
                  static_cast<std::uint32_t>(block_index_ >> 32),
                  static_cast<std::uint32_t>(stream_),
                  static_cast<std::uint32_t>(stream_ >> 32)};
  const Key key{static_cast<std::uint32_t>(seed_),
                static_cast<std::uint32_t>(seed_ >> 32)};
  buffer_ = encrypt(ctr, key);
  ++block_index_;
  cursor_ = 0;
}

Philox4x32::result_type Philox4x32::operator()() noexcept {
  if (cursor_ >= 4) refill();
  const std::uint64_t lo = buffer_[cursor_];
  const std::uint64_t hi = buffer_[cursor_ + 1];
  cursor_ += 2;
  return (hi << 32) | lo;
}

std::uint64_t derive_stream_id(std::uint64_t parent, std::uint64_t index) noexcept {
  std::uint64_t z = parent + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace fvlab
