#ifndef OPTREE_RANDOM_HPP
#define OPTREE_RANDOM_HPP

#include <array>
#include <cstdint>
#include <limits>

#include "optree/geometry.hpp"

namespace optree {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11), exposed as a
/// UniformRandomBitGenerator producing 32-bit words.
///
/// A stream is fixed by a 64-bit key (the seed) and a 64-bit stream id that
/// occupies the upper half of the 128-bit counter; the lower half counts
/// blocks. Distinct (key, stream) pairs never share output blocks.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Raw ten-round bijection, exposed for known-answer tests.
  static Block encrypt(Block counter, Key key);

 private:
  Key key_;
  Block counter_;
  Block buffer_{};
  unsigned used_ = 4;
};

/// SplitMix64 finalizer; used to derive stream ids and per-draw seeds.
std::uint64_t mix64(std::uint64_t x);

/// Stream id of a region: mix64 folded over the key words, seeded by `salt`.
std::uint64_t region_stream(const RegionKey& key, std::uint64_t salt);

/// Seed of the i-th draw derived from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t i);

/// Uniform double in [0,1) with 53 random bits.
double uniform01(Philox4x32& rng);

}  // namespace optree

#endif  // OPTREE_RANDOM_HPP
