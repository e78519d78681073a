#pragma once

// Counter-based random streams.
//
// Every stochastic routine takes an explicit `Rng&`; there is no hidden global
// generator. A stream is identified by (seed, stream id): the seed is the
// Philox key and the stream id occupies the upper half of the 128-bit
// counter, so streams for different ids never overlap.

#include <array>
#include <cstdint>

namespace dsmis {

class Philox4x32 {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    if (next_ == 2) refill();
    const std::uint64_t hi = buffer_[2 * next_];
    const std::uint64_t lo = buffer_[2 * next_ + 1];
    ++next_;
    return (hi << 32) | lo;
  }

  // One application of the 10-round bijection.
  static Block bijection(Block counter, Key key);

 private:
  void refill();

  Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Block buffer_{};
  int next_ = 2;
};

using Rng = Philox4x32;

inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) { return Rng(seed, stream); }

// Uniform on the open interval (0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// SplitMix64 finalizer; used to derive independent seeds for batches,
// replicates and grid points from a user seed.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace dsmis
