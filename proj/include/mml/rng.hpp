#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace mml {

// splitmix64, used for seeding and for deriving named streams.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
};

// Derives an independent stream seed from a root seed and a label.
// All experiment randomness flows from one 64-bit seed through this splitter.
std::uint64_t derive_stream(std::uint64_t seed, std::string_view name);

// xoshiro256** with hand-rolled distributions. std::mt19937_64 is portable
// but the standard distributions are not; every draw here is specified
// bit-exactly so reruns reproduce byte-identical outputs.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // in [0, 1)
    double uniform01();

    // in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // standard normal, Box-Muller with a cached spare
    double normal();

    // in [0, n)
    std::uint64_t below(std::uint64_t n);

    bool bernoulli(double p) { return uniform01() < p; }

    // index draw proportional to non-negative weights (need not be normalised)
    std::size_t weighted_index(std::span<const double> weights);

  private:
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mml
