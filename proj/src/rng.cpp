#include "rng.hpp"

namespace ssk {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : state_) s = splitmix64(x);
}

std::uint64_t SeededRng::next_u64() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double SeededRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

float SeededRng::uniform_range(float lo, float hi) {
  return lo + static_cast<float>(uniform() * (static_cast<double>(hi) - static_cast<double>(lo)));
}

std::uint64_t SeededRng::next_below(std::uint64_t bound) {
  if (bound < 2) return 0;
  // rejection sampling to avoid modulo bias
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % bound;
}

std::uint64_t SeededRng::derive(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t x = base;
  std::uint64_t out = splitmix64(x);
  for (std::uint64_t tag : tags) {
    x ^= tag + 0x9e3779b97f4a7c15ULL + (x << 6) + (x >> 2);
    out = splitmix64(x);
  }
  return out;
}

}  // namespace ssk
