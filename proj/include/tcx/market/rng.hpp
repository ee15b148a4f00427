#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace tcx::market {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based standard normal: the draw for (path, step, asset) depends only
/// on the run seed and those three indices, so growing M or N never reshuffles
/// existing draws.
inline double std_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t asset) noexcept {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ path);
    h = splitmix64(h ^ (step * 0x100000001b3ULL));
    h = splitmix64(h ^ (asset + 0x632be59bd9b4e019ULL));
    const std::uint64_t h2 = splitmix64(h);
    const double u1 = (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Brownian increments ΔW = L z √Δt for one (path, step).
inline void correlate(const Eigen::MatrixXd& L, const double* z, double sqrt_dt, double* dW) {
    const auto d = L.rows();
    for (Eigen::Index i = 0; i < d; ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j <= i; ++j) s += L(i, j) * z[j];
        dW[i] = s * sqrt_dt;
    }
}

/// Dense table of increments dW[(n * M + m) * d + i] for n < N, m < M.
/// With `antithetic`, odd paths mirror the preceding even path, so for even M
/// every step's increments average to exactly zero.
struct NoiseTable {
    std::size_t N = 0, M = 0, d = 0;
    std::vector<double> dW;

    NoiseTable() = default;
    NoiseTable(std::uint64_t seed, std::size_t N_, std::size_t M_, const Eigen::MatrixXd& L, double dt,
               bool antithetic = false)
        : N(N_), M(M_), d(static_cast<std::size_t>(L.rows())), dW(N_ * M_ * d) {
        std::vector<double> z(d);
        const double sq = std::sqrt(dt);
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t m = 0; m < M; ++m) {
                double* out = &dW[(n * M + m) * d];
                if (antithetic && m % 2 == 1) {
                    const double* twin = out - d;
                    for (std::size_t j = 0; j < d; ++j) out[j] = -twin[j];
                    continue;
                }
                const std::uint64_t draw = antithetic ? m / 2 : m;
                for (std::size_t j = 0; j < d; ++j) z[j] = std_normal(seed, draw, n, j);
                correlate(L, z.data(), sq, out);
            }
    }

    [[nodiscard]] const double* at(std::size_t n, std::size_t m) const noexcept { return &dW[(n * M + m) * d]; }
};

}  // namespace tcx::market
