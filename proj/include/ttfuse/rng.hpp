#pragma once

#include <cstdint>
#include <span>

namespace ttfuse {

// SplitMix64 (Steele, Lea, Flood 2014). The integer and uniform streams are
// identical on every platform; normal() goes through std::log/std::cos and
// therefore depends on the host libm only in the last ulp.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64();
    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Unbiased integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);
    // Standard normal via Box-Muller; caches the second variate.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Independent child stream; does not advance this generator's sequence
    // beyond one draw.
    Rng fork() { return Rng(next_u64() ^ 0x9e3779b97f4a7c15ULL); }

    std::uint64_t state() const { return state_; }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ttfuse
