#pragma once

#include <array>
#include <cstdint>

namespace nudgenet {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// A generator is addressed by (seed, stream). Draw k of a stream is a pure
/// function of (seed, stream, k), so ensemble member i always receives the
/// same numbers regardless of evaluation order or thread count.
///
/// Stream layout used across the project:
///   stream = (purpose << 32) | index
/// where `purpose` is one of the StreamPurpose values and `index` is the
/// ensemble member, network component, etc.
class Philox {
 public:
  using Block = std::array<std::uint32_t, 4>;

  Philox(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  /// Raw ten-round bijection, exposed for known-answer tests.
  static Block bijection(Block counter, std::array<std::uint32_t, 2> key);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform double in (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  std::uint64_t next_u64();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  Block buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

enum class StreamPurpose : std::uint64_t {
  train_initial = 1,
  test_initial = 2,
  shuffle = 3,
  init_params = 4,
  misc = 5,
};

constexpr std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t index) {
  return (static_cast<std::uint64_t>(purpose) << 32) | (index & 0xffffffffULL);
}

}  // namespace nudgenet
