#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace lawsim {

// Seeded generator with self-contained sampling routines. mt19937_64 output is
// fully specified by the standard, and every distribution here is derived from
// its raw stream, so identical seeds replay identical draw sequences on any
// platform (the std::*_distribution adapters do not give that guarantee).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_double() * static_cast<double>(span));
    }

    bool bernoulli(double p) {
        if (p <= 0.0) {
            next_double(); // keep the draw count independent of p
            return false;
        }
        return next_double() < p;
    }

    // Standard normal via Box-Muller; consumes exactly two draws.
    double normal() {
        const double u1 = 1.0 - next_double();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    double log_normal(double location, double scale) {
        return std::exp(normal(location, scale));
    }

    // Index into a weight vector; weights need not be normalized.
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double x = next_double() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            x -= weights[i];
            if (x < 0.0) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace lawsim
