#pragma once

#include <array>
#include <cstdint>

namespace mda {

/// Philox4x32-10 counter-based generator: a keyed bijection of a 128-bit
/// counter, so any (key, counter) block can be drawn independently.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Block counter, Key key);
};

/// Sequential draws from the blocks (key, {c0, c1, c2, 0..}) of one Philox stream.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream_hi, std::uint32_t stream_lo);

  std::uint32_t next_u32();
  /// Uniform double in the open interval (0, 1) with 53 random bits.
  double uniform();
  /// Exponential variate with the given mean.
  double exponential(double mean);

 private:
  Philox4x32::Key key_;
  Philox4x32::Block counter_;
  Philox4x32::Block buffer_{};
  int used_ = 4;
};

}  // namespace mda
