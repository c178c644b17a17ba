#pragma once

#include <cmath>
#include <cstdint>

namespace eoslab {

// SplitMix64. Single generator used across the repository so that every
// randomized routine is reproducible from a 64-bit seed alone.
//
// Mapping to [0,1): take the top 53 bits of the output word and multiply by
// 2^-53. next_open_unit() shifts into (0,1] so logs stay finite.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform on [0,1)
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform on (0,1]
    double next_open_unit() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // uniform on [lo, hi)
    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // standard normal, Box-Muller; the paired draw is cached
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_open_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // independent child stream; advances this stream by one word
    SplitMix64 split() { return SplitMix64(next_u64()); }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace eoslab
