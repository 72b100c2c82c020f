#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace metaspo {

// Deterministic RNG used everywhere a seed appears in a contract. The C++
// standard leaves std::shuffle / std::uniform_int_distribution output
// unspecified across implementations, so replayable runs need a fixed
// generator. splitmix64 is small and well studied.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, bound) via rejection sampling.
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return v % bound;
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

  // min(n, items.size()) distinct indices, sampled uniformly without
  // replacement; result order follows the draw order.
  std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n) {
    std::vector<std::size_t> pool(population);
    for (std::size_t i = 0; i < population; ++i) pool[i] = i;
    const std::size_t take = n < population ? n : population;
    std::vector<std::size_t> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
      std::size_t j = i + static_cast<std::size_t>(below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

 private:
  std::uint64_t state_;
};

// Stable string hash (FNV-1a); std::hash is implementation-defined and
// must not feed anything that ends up in a replayable artifact.
inline std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Derives an independent stream from a base seed and a context label,
// e.g. per-task or per-round sampling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  Rng mix(seed ^ (stable_hash(label) + 0x9e3779b97f4a7c15ULL * (a + 1) + b));
  return mix.next();
}

}  // namespace metaspo
