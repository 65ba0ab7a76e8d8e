#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace nmsim {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Deterministic per-stream seed derivation; independent of thread scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t s = master ^ (0xD1B54A32D192ED03ull * (stream + 1));
    splitmix64(s);
    return splitmix64(s);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

// Multinomial draw by chained binomials; O(k) per call.
std::vector<long> multinomial_sample(std::mt19937_64& engine, long trials,
                                     std::span<const double> probs);

// Independent Poisson counts with means trials*probs (sensitivity-check mode).
std::vector<long> poisson_sample(std::mt19937_64& engine, long trials,
                                 std::span<const double> probs);

}  // namespace nmsim
