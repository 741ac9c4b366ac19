#pragma once

#include <cstdint>
#include <vector>

namespace trapgrad {

// splitmix64 step (Vigna). Used both as the generator and as the seed mixer so
// that every stream is a pure function of (master seed, stream indices) and
// results do not depend on the platform's std::random distributions.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Documented derivation: seed for (tag) is splitmix64 applied to the master
// state advanced by the tag; nesting derive_seed(derive_seed(m, r), stream)
// gives each replicate and each sub-component its own independent stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
  std::uint64_t s = master ^ (tag + 0x9E3779B97F4A7C15ull) * 0xBF58476D1CE4E5B9ull;
  return splitmix64(s);
}

// Stream tags for the per-replicate sub-components.
namespace stream {
constexpr std::uint64_t data = 1;
constexpr std::uint64_t split = 2;
constexpr std::uint64_t twin = 3;
constexpr std::uint64_t model = 4;
constexpr std::uint64_t trapdoor = 5;
constexpr std::uint64_t populate = 6;
constexpr std::uint64_t inject = 7;
constexpr std::uint64_t detector = 8;
constexpr std::uint64_t attack = 9;
constexpr std::uint64_t steal = 10;
constexpr std::uint64_t surrogate = 11;
}  // namespace stream

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, bound) without modulo bias.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound + 1) % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x > limit);
    return x % bound;
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // First k entries of a random permutation of 0..n-1.
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    if (k > n) k = n;
    for (int i = 0; i < k; ++i) {
      int j = i + static_cast<int>(next_below(static_cast<std::uint64_t>(n - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
  }

 private:
  std::uint64_t state_;
};

}  // namespace trapgrad
