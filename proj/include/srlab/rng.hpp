#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace srlab {

// Deterministic random stream. mt19937_64 has a fully specified sequence, and
// every real-valued draw below is built from raw 64-bit words, so identical
// seeds give identical bytes on every platform (libstdc++'s distribution
// objects do not promise that).
//
// Streams are split by name: a child stream's seed depends only on the parent
// seed and the label, never on how much the parent has already been consumed.
// That is what keeps worker order / evaluation order out of the artifacts.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }

  Rng split(std::string_view label) const {
    return Rng(mix(seed_, hash_label(label)));
  }
  Rng split(std::string_view label, std::uint64_t index) const {
    return Rng(mix(mix(seed_, hash_label(label)), index));
  }

  std::uint64_t next_u64() { return gen_(); }

  // uniform on [0, 1) with 53 random bits
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  // uniform on [0, n), unbiased via bitmask rejection
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    std::uint64_t mask = ~std::uint64_t{0} >> __builtin_clzll(n - 1);
    for (;;) {
      std::uint64_t v = next_u64() & mask;
      if (v < n) return v;
    }
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + int(below(std::uint64_t(hi - lo) + 1));
  }

  bool coin(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + b * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t hash_label(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace srlab
