#pragma once

#include <cstdint>
#include <random>

namespace matchcal {

// splitmix64 finalizer; used to derive independent seed streams.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derive the seed of a named sub-stream. Streams are identified by small
// integer tags so that, e.g., the population generator and the replicate
// sampler never share a sequence.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix64(master ^ mix64(stream));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index) {
  return mix64(derive_seed(master, stream) ^ mix64(index + 0x51ed2701ull));
}

namespace stream {
constexpr std::uint64_t population_x = 1;
constexpr std::uint64_t population_y = 2;
constexpr std::uint64_t stsrs = 3;
constexpr std::uint64_t poisson = 4;
constexpr std::uint64_t srs = 5;
constexpr std::uint64_t replicate = 6;
constexpr std::uint64_t sp_draw = 7;
constexpr std::uint64_t panel_draw = 8;
constexpr std::uint64_t dr_subsample = 9;
constexpr std::uint64_t match_order = 10;
}  // namespace stream

// Seedable wrapper around mt19937_64. One instance per logical stream;
// instances are cheap and never shared across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }

  double gamma(double shape, double scale) {
    return std::gamma_distribution<double>(shape, scale)(eng_);
  }

  double normal(double mean, double sd) {
    return std::normal_distribution<double>(mean, sd)(eng_);
  }

  // Inclusive on both ends.
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(eng_);
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace matchcal
