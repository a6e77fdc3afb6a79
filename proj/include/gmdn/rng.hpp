// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>

namespace gmdn {

// Splitmix64 generator. Chosen over std engines because its output sequence
// is fully pinned by the algorithm, so datasets are bit-identical across
// platforms. Streams are split by hashing (seed, stream-id) pairs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0,1) with 53 bits of precision
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // uniform integer in [0, n), n > 0
  std::uint64_t next_below(std::uint64_t n) {
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x > limit);
    return x % n;
  }

  bool bernoulli(double p) { return next_double() < p; }

  // derive an independent child stream; deterministic in (parent seed, id)
  Rng split(std::uint64_t stream_id) const {
    Rng mix(state_ ^ (0x6a09e667f3bcc909ULL + stream_id * 0xd1b54a32d192ed03ULL));
    mix.next_u64();
    return Rng(mix.next_u64());
  }

 private:
  std::uint64_t state_;
};

}  // namespace gmdn
