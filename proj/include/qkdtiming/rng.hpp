#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qkdtiming {

/// Counter-based random stream keyed on (seed, slot, stream). Each draw is a
/// pure function of the key and a counter, so slot ranges can be generated in
/// any order, or in parallel, and still produce identical numbers.
///
/// The generator is the splitmix64 finalizer applied to key + counter * gamma;
/// the key itself is derived by mixing seed, slot and stream through the same
/// finalizer so that neighbouring slots land in unrelated parts of the cycle.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t slot, std::uint64_t stream = 0)
        : key_(mix(mix(mix(seed + kGamma) ^ slot) ^ (stream * kStreamSalt))) {}

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

    /// Uniform in [0, 1), 53 random bits.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool next_bit() { return (next_u64() >> 63) != 0; }

    unsigned next_bits(int n) {
        return static_cast<unsigned>(next_u64() >> (64 - n));
    }

    /// Standard normal via Box-Muller; the second value of each pair is cached.
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_unit(); // (0, 1], keeps log finite
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Poisson by Knuth's multiplication method; exp(-mean) is passed in so
    /// hot loops can precompute it. Intended for the small means used here.
    int next_poisson(double exp_neg_mean) {
        int k = -1;
        double p = 1.0;
        do {
            p *= next_unit();
            ++k;
        } while (p > exp_neg_mean);
        return k;
    }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
    static constexpr std::uint64_t kStreamSalt = 0xC2B2AE3D27D4EB4Full;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_{0};
    double spare_{0.0};
    bool has_spare_{false};
};

} // namespace qkdtiming
