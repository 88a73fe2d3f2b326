#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace fluid {

// Philox4x32-10 block function. Exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Counter-based random stream.
///
/// A stream is identified by (key, stream id) and produces the Philox
/// keystream for counters (stream id, 0), (stream id, 1), ... Child streams
/// obtained through split() are statistically independent of the parent and
/// of each other, so replications can be handed disjoint streams and run in
/// any order on any number of threads with identical results.
///
/// Satisfies UniformRandomBitGenerator, so std distributions accept it.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  /// Stream for a path of indices below a root seed, e.g. {tag, n, rep}.
  static RandomStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  [[nodiscard]] RandomStream split(std::uint64_t index) const;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform double in (0, 1).
  double uniform_open();
  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  bool bernoulli(double probability) { return uniform() < probability; }

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t stream_id() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int available_ = 0;
};

}  // namespace fluid
