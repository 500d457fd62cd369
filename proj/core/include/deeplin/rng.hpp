#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace deeplin {

// Independent random streams of one simulation seed.
enum class Stream : std::uint64_t { Weights = 1, Data = 2, Noise = 3, Batches = 4 };

// Counter-based generator: output i is splitmix64(key + i * golden). Any
// (seed, stream) pair gives an independent, reproducible sequence.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, Stream stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  double normal() { return normal_(*this); }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Seed of the i-th ensemble member.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index);

}  // namespace deeplin
