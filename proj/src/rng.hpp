#pragma once

#include <cstdint>
#include <vector>

namespace ssk {

// Deterministic xoshiro256** generator seeded through splitmix64.
// The stream depends only on the seed, never on platform or standard library,
// so identical seeds give bit-identical results everywhere.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t next_u64();
  // uniform in [0, 1) with 53 random bits
  double uniform();
  float uniform_range(float lo, float hi);
  // unbiased integer in [0, bound)
  std::uint64_t next_below(std::uint64_t bound);

  std::uint64_t seed() const { return seed_; }

  // Derive an independent stream seed from a base seed and a tag sequence
  // (subject index, fold, iteration, ...).
  static std::uint64_t derive(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

 private:
  std::uint64_t state_[4];
  std::uint64_t seed_;
};

// In-place Fisher-Yates shuffle driven by the given rng.
template <typename T>
void shuffle(std::vector<T>& items, SeededRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace ssk
