// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace ppsdoa {

// Deterministic 64-bit generator (splitmix64). All randomness in the library
// goes through this class so that sequences do not depend on the standard
// library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n); n >= 1
    std::size_t pick(std::size_t n) {
        return std::size_t((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // standard normal via Box-Muller; consumes two draws per pair
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        auto [a, b] = gaussian_pair();
        spare_ = b;
        have_spare_ = true;
        return a;
    }

    // circular complex Gaussian with E|z|^2 = variance
    std::complex<double> gaussian_complex(double variance) {
        auto [a, b] = gaussian_pair();
        const double s = std::sqrt(variance / 2.0);
        return {s * a, s * b};
    }

private:
    std::pair<double, double> gaussian_pair() {
        const double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = double(next_u64() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double w = 2.0 * 3.14159265358979323846 * u2;
        return {r * std::cos(w), r * std::sin(w)};
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Stream splitting: mixes (master, a, b) into an independent seed. Used to
// give every Monte-Carlo run and every RANSAC iteration its own generator.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    Rng g(master ^ (0x9E3779B97F4A7C15ull * (a + 1)));
    std::uint64_t h = g.next_u64();
    Rng g2(h ^ (0xBF58476D1CE4E5B9ull * (b + 1)));
    return g2.next_u64();
}

}  // namespace ppsdoa
