#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>

#include "qfilter/matrix_ops.hpp"

namespace qfilter {

/// Counter-based splitmix64 stream. Output i is a pure function of
/// (initial state, i), so streams can be derived per trajectory and
/// produce identical draws under any scheduling.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t state) : state_(state) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in (0, 1].
    double uniform_pos() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Decorrelated per-stream seed from (master seed, stream index).
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(master + 0x9e3779b97f4a7c15ULL * (index + 1));
}

/// One Box-Muller pair of independent standard normals.
inline std::pair<double, double> normal_pair(SplitMix64& g) {
    const double u1 = g.uniform_pos();
    const double u2 = g.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(th), r * std::sin(th)};
}

/// Fills a vector with independent standard circular complex Gaussians
/// (E[z z^+] = I, E[z z^T] = 0).
inline void fill_standard_circular(SplitMix64& g, ComplexVector& out) {
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const auto [a, b] = normal_pair(g);
        out(i) = Complex(a, b) * std::numbers::sqrt2 * 0.5;
    }
}

} // namespace qfilter
