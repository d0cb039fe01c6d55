#include "metabayes/tasks/rng.hpp"

#include <cmath>
#include <numbers>

#include "metabayes/errors.hpp"

namespace metabayes {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> SeededRng::philox(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

SeededRng SeededRng::substream(std::uint64_t id) const {
  return SeededRng(state_.seed, splitmix64(state_.stream ^ splitmix64(id + 0x5eed)));
}

std::uint64_t SeededRng::next_u64() {
  const std::uint64_t n = state_.counter++;
  const std::array<std::uint32_t, 4> counter = {
      static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n >> 32),
      static_cast<std::uint32_t>(state_.stream), static_cast<std::uint32_t>(state_.stream >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(state_.seed),
                                            static_cast<std::uint32_t>(state_.seed >> 32)};
  const auto out = philox(counter, key);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

double SeededRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t SeededRng::uniform_index(std::uint64_t n) {
  if (n == 0) throw ContractViolation("uniform_index: empty range");
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = n * (~std::uint64_t{0} / n);
  std::uint64_t x = 0;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double SeededRng::normal() {
  // Box-Muller, one variate per pair of uniforms.
  const double u1 = uniform_open0();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double SeededRng::exponential(double rate) {
  if (!(rate > 0.0)) throw ContractViolation("exponential: rate must be positive");
  return -std::log(uniform_open0()) / rate;
}

double SeededRng::gamma(double shape) {
  if (!(shape > 0.0)) throw ContractViolation("gamma: shape must be positive");
  if (shape < 1.0) {
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform_open0(), 1.0 / shape);
  }
  // Marsaglia & Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = uniform_open0();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double SeededRng::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  return x / (x + y);
}

}  // namespace metabayes
