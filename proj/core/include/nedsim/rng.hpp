#pragma once

#include <cstdint>
#include <random>

namespace nedsim {

// splitmix64 step; used both to mix seeds and as a cheap generator for
// bulk Monte-Carlo draws.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives a stream seed from (master, index) so that parallel workers get
// independent, reproducible streams regardless of scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master ^ (0x517cc1b727220a95ULL * (index + 1));
    splitmix64(s);
    return splitmix64(s);
}

// Minimal UniformRandomBitGenerator built on splitmix64. Fast enough for
// 10^9-draw oracles where mt19937_64 construction/throughput would dominate.
class SplitMix64 {
public:
    using result_type = std::uint64_t;
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~0ULL; }
    result_type operator()() { return splitmix64(state_); }

    // Uniform double in [0,1).
    double uniform() { return double((*this)() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), n >= 1.
    std::uint64_t below(std::uint64_t n) { return (*this)() % n; }

private:
    std::uint64_t state_;
};

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::uint64_t index = 0) {
    return Rng(derive_seed(master, index));
}

}  // namespace nedsim
