#pragma once

#include <cstdint>
#include <random>

namespace aip {

// splitmix64: used to derive well-separated seeds for named substreams so
// results are independent of thread scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(splitmix64(base) ^ splitmix64(~stream));
}

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t base_seed, std::uint64_t stream_id) {
  return Rng(mix_seed(base_seed, stream_id));
}

inline double runif(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double rnorm(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

// Beta(a, b) via two gamma draws.
inline double rbeta(Rng& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  double x = ga(rng), y = gb(rng);
  return x / (x + y);
}

}  // namespace aip
