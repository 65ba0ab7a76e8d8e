#include "nmsim/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace nmsim {

std::vector<long> multinomial_sample(std::mt19937_64& engine, long trials,
                                     std::span<const double> probs) {
    if (trials < 0) throw std::invalid_argument("multinomial_sample: negative trial count");
    std::vector<long> counts(probs.size(), 0);
    long remaining = trials;
    double mass = 1.0;
    for (std::size_t k = 0; k + 1 < probs.size() && remaining > 0; ++k) {
        const double p = std::clamp(mass > 0.0 ? probs[k] / mass : 1.0, 0.0, 1.0);
        std::binomial_distribution<long> bin(remaining, p);
        const long n = bin(engine);
        counts[k] = n;
        remaining -= n;
        mass -= probs[k];
    }
    if (!counts.empty()) counts.back() += remaining;
    return counts;
}

std::vector<long> poisson_sample(std::mt19937_64& engine, long trials,
                                 std::span<const double> probs) {
    std::vector<long> counts(probs.size(), 0);
    for (std::size_t k = 0; k < probs.size(); ++k) {
        const double mean = static_cast<double>(trials) * std::max(probs[k], 0.0);
        if (mean > 0.0) {
            std::poisson_distribution<long> pois(mean);
            counts[k] = pois(engine);
        }
    }
    return counts;
}

}  // namespace nmsim
