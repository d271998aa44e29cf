#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace s2p2 {

/// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
/// numbers: as easy as 1, 2, 3", SC'11).
///
/// Key = (seed & 0xffffffff, seed >> 32). Counter = (block_lo, block_hi,
/// stream_lo, stream_hi) where `block` increments once per 128-bit output
/// block. Each block yields two 64-bit words, w = (x[1] << 32) | x[0] and then
/// (x[3] << 32) | x[2]. Distinct `stream` values give independent streams for
/// the same seed, so simulations of sequence i use stream i.
///
/// Derived variates use fixed formulas so other implementations can
/// reproduce them:
///   uniform()      = (next_u64() >> 11) * 2^-53                 in [0, 1)
///   exponential(r) = -log1p(-uniform()) / r
///   normal()       = sqrt(-2 log(1 - u1)) * cos(2 pi u2)        (no caching)
class Philox {
 public:
  using result_type = std::uint64_t;

  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next_u64(); }
  result_type next_u64() noexcept;

  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double exponential(double rate) noexcept;
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  /// One Philox4x32-10 block for an explicit counter and key.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key) noexcept;

 private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_index_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_words_ = 0;  // 64-bit words remaining in buffer_
};

}  // namespace s2p2
