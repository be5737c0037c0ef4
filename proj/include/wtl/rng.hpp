#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

namespace wtl {

using Rng = std::mt19937_64;

/// Seeds a generator from a list of integers (e.g. a run seed plus an image id),
/// so independent streams stay reproducible regardless of scheduling.
inline Rng make_rng(std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  for (auto k : keys) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq s(words.begin(), words.end());
  return Rng(s);
}

// The standard distributions are implementation-defined; these are not.

/// Uniform double in [0, 1).
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [lo, hi].
inline int uniform_int(Rng& rng, int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(rng() % span);
}

/// Standard normal via Box-Muller.
inline double normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = last - first;
  for (auto i = n - 1; i > 0; --i) {
    const auto j = static_cast<decltype(i)>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(first[i], first[j]);
  }
}

}  // namespace wtl
