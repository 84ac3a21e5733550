#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace iacolight
{
    /// Finalizer from SplitMix64; used for seed derivation.
    inline constexpr std::uint64_t mix64(std::uint64_t x) noexcept
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    /// Stable seed derived from a base seed and an ordered list of integer keys.
    /// Only the key values matter, so adding a new consumer never shifts an existing stream.
    inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) noexcept
    {
        std::uint64_t h = mix64(base ^ 0x5851f42d4c957f2dULL);
        for (std::uint64_t k : keys)
        {
            h = mix64(h ^ mix64(k + 0x2545f4914f6cdd1dULL));
        }
        return h;
    }

    // std::mt19937_64 has a fully specified output sequence; the distributions below are
    // written out by hand because the standard library ones are implementation-defined.
    class Rng
    {
    public:
        using result_type = std::uint64_t;

        explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

        static constexpr result_type min() { return std::mt19937_64::min(); }
        static constexpr result_type max() { return std::mt19937_64::max(); }
        result_type operator()() { return engine_(); }

        /// Uniform in [0, 1) with 53 random bits.
        double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

        double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

        /// Uniform integer in [0, n). n must be > 0.
        std::uint64_t below(std::uint64_t n)
        {
            // Reject the low 2^64 mod n values so every residue is equally likely.
            const std::uint64_t threshold = (0 - n) % n;
            std::uint64_t x;
            do
            {
                x = engine_();
            } while (x < threshold);
            return x % n;
        }

        /// Standard normal via Box-Muller (one value per call; the pair partner is discarded).
        double normal()
        {
            double u1 = uniform01();
            while (u1 <= 0.0)
            {
                u1 = uniform01();
            }
            const double u2 = uniform01();
            return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        }

        double normal(double mean, double stddev) { return mean + stddev * normal(); }

        friend bool operator==(const Rng &, const Rng &) = default;

    private:
        std::mt19937_64 engine_;
    };

} // namespace iacolight
