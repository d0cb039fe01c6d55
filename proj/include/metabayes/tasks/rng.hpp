#pragma once

#include <array>
#include <cstdint>

namespace metabayes {

/// Counter-based generator (Philox4x32-10). The full state is (seed, stream,
/// counter), so it serializes exactly and sub-streams can be derived without
/// touching the parent. Distribution samplers are implemented here rather than
/// through <random> so that streams are identical across standard libraries.
class SeededRng {
 public:
  struct State {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t counter = 0;
    friend bool operator==(const State&, const State&) = default;
  };

  explicit SeededRng(std::uint64_t seed = 0, std::uint64_t stream = 0) : state_{seed, stream, 0} {}
  explicit SeededRng(const State& state) : state_(state) {}

  /// Independent generator keyed by (seed, hash(stream, id)).
  SeededRng substream(std::uint64_t id) const;

  const State& state() const noexcept { return state_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1].
  double uniform_open0() { return 1.0 - uniform(); }
  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double exponential(double rate);
  double gamma(double shape);
  double beta(double a, double b);
  bool bernoulli(double p) { return uniform() < p; }

  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> counter,
                                             std::array<std::uint32_t, 2> key);

 private:
  State state_;
};

}  // namespace metabayes
