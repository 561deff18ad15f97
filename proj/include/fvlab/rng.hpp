#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace fvlab {

/// Counter-based Philox4x32-10 generator.
///
/// A stream is identified by (seed, stream id). The seed is the Philox key;
/// the stream id occupies the upper half of the 128-bit counter, so distinct
/// ids never share a block. Output is 64 bits per call (two 32-bit words).
class Philox4x32 {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32(std::uint64_t seed, std::uint64_t stream_id) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  /// Raw bijection used by the generator (exposed for known-answer tests).
  static Block encrypt(Block counter, Key key) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_index_ = 0;
  Block buffer_{};
  int cursor_ = 4;
};

using Stream = Philox4x32;

/// Mixes a parent stream id with a child index (splitmix64 finalizer).
std::uint64_t derive_stream_id(std::uint64_t parent, std::uint64_t index) noexcept;

/// Uniform double in the open interval (0, 1) with 53-bit resolution.
inline double uniform_open(Stream& s) noexcept {
  return (static_cast<double>(s() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace fvlab
