#include "deeplin/rng.hpp"

namespace deeplin {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, Stream stream)
    : key_(splitmix64(splitmix64(seed) ^ (static_cast<std::uint64_t>(stream) * 0xD1B54A32D192ED03ull))) {}

CounterRng::result_type CounterRng::operator()() {
  return splitmix64(key_ + 0x9E3779B97F4A7C15ull * counter_++);
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index) {
  return splitmix64(base_seed * 0x2545F4914F6CDD1Dull + index);
}

}  // namespace deeplin
