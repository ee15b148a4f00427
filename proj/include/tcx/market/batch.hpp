#pragma once

#include <cstdint>
#include <iomanip>
#include <ostream>
#include <vector>

#include "tcx/market/dynamics.hpp"
#include "tcx/market/rng.hpp"
#include "tcx/market/spec.hpp"

namespace tcx::market {

/// Forward simulation of every control column under shared noise. Column c
/// applies the trade rate grids[k][c] to every asset of agent k at every step.
/// Arrays are flat with the index order given in each accessor.
struct SimBatch {
    std::size_t N = 0, M = 0, C = 0, d = 0, K = 0;
    double dt = 0.0;
    std::vector<double> S;      // [n][m][i][c]
    std::vector<double> b;      // [n][m][k][c]
    std::vector<double> alpha;  // [n][m][i][k][c]
    std::vector<double> dW;     // [n][m][i]
    std::vector<double> X;      // [n][m][k][c]
    std::vector<double> Xhat;   // [n][m][k][c]
    std::vector<double> XT;     // [m][k][c] after terminal liquidation
    std::vector<double> XhatT;  // [m][k][c]

    [[nodiscard]] std::size_t iS(std::size_t n, std::size_t m, std::size_t i, std::size_t c) const {
        return ((n * M + m) * d + i) * C + c;
    }
    [[nodiscard]] std::size_t ib(std::size_t n, std::size_t m, std::size_t k, std::size_t c) const {
        return ((n * M + m) * K + k) * C + c;
    }
    [[nodiscard]] std::size_t ia(std::size_t n, std::size_t m, std::size_t i, std::size_t k, std::size_t c) const {
        return (((n * M + m) * d + i) * K + k) * C + c;
    }
    [[nodiscard]] std::size_t iT(std::size_t m, std::size_t k, std::size_t c) const { return (m * K + k) * C + c; }
};

inline SimBatch generate_batch(const MarketSpec& s, const std::vector<ControlGrid>& grids, std::size_t N,
                               std::size_t M, std::uint64_t seed) {
    s.validate();
    if (N == 0 || M == 0) throw SpecError("batch: N and M must be positive");
    if (grids.size() != s.K) throw SpecError("batch: need one control grid per agent");
    const std::size_t C = grids[0].size();
    for (const auto& g : grids) {
        g.validate();
        if (g.size() != C) throw SpecError("batch: control grids must share the point count");
    }
    SimBatch B;
    B.N = N, B.M = M, B.C = C, B.d = s.d, B.K = s.K, B.dt = s.T / static_cast<double>(N);
    const NoiseTable noise(seed, N, M, MarketSpec::cholesky(s.rho), B.dt);
    B.dW = noise.dW;
    B.S.resize((N + 1) * M * s.d * C);
    B.b.resize((N + 1) * M * s.K * C);
    B.alpha.resize((N + 1) * M * s.d * s.K * C);
    B.X.resize((N + 1) * M * s.K * C);
    B.Xhat.resize(B.X.size());
    B.XT.resize(M * s.K * C);
    B.XhatT.resize(B.XT.size());

    std::vector<double> v(s.d * s.K), Xv(s.K), Xh(s.K);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < s.d; ++i)
            for (std::size_t k = 0; k < s.K; ++k) v[s.ik(i, k)] = grids[k][c];
        const auto coeffs = step_coeffs(s, B.dt, v.data());
        for (std::size_t m = 0; m < M; ++m) {
            State x = State::initial(s);
            for (std::size_t n = 0;; ++n) {
                for (std::size_t i = 0; i < s.d; ++i) B.S[B.iS(n, m, i, c)] = x.S[i];
                for (std::size_t k = 0; k < s.K; ++k) B.b[B.ib(n, m, k, c)] = x.b[k];
                for (std::size_t i = 0; i < s.d; ++i)
                    for (std::size_t k = 0; k < s.K; ++k) B.alpha[B.ia(n, m, i, k, c)] = x.alpha[s.ik(i, k)];
                Xv = wealth(s, x);
                relative_wealth(Xv.data(), s.K, s.phi, Xh.data());
                for (std::size_t k = 0; k < s.K; ++k) {
                    B.X[B.ib(n, m, k, c)] = Xv[k];
                    B.Xhat[B.ib(n, m, k, c)] = Xh[k];
                }
                if (n == N) break;
                advance(coeffs, s.d, s.K, noise.at(n, m), x.S.data(), x.b.data());
                advance_holdings(s.d * s.K, B.dt, v.data(), x.alpha.data());
            }
            terminal_liquidation(s, B.dt, x);
            relative_wealth(x.b.data(), s.K, s.phi, Xh.data());
            for (std::size_t k = 0; k < s.K; ++k) {
                B.XT[B.iT(m, k, c)] = x.b[k];
                B.XhatT[B.iT(m, k, c)] = Xh[k];
            }
        }
    }
    return B;
}

/// Long-format dump: n,m,i,k,c,field,value. Fields without an asset or agent
/// axis leave that column empty.
inline void write_batch_csv(std::ostream& os, const SimBatch& B) {
    os << "n,m,i,k,c,field,value\n";
    os << std::setprecision(17);
    for (std::size_t n = 0; n <= B.N; ++n)
        for (std::size_t m = 0; m < B.M; ++m)
            for (std::size_t c = 0; c < B.C; ++c) {
                for (std::size_t i = 0; i < B.d; ++i) os << n << ',' << m << ',' << i << ",," << c << ",S," << B.S[B.iS(n, m, i, c)] << '\n';
                for (std::size_t k = 0; k < B.K; ++k) {
                    os << n << ',' << m << ",," << k << ',' << c << ",b," << B.b[B.ib(n, m, k, c)] << '\n';
                    os << n << ',' << m << ",," << k << ',' << c << ",X," << B.X[B.ib(n, m, k, c)] << '\n';
                    os << n << ',' << m << ",," << k << ',' << c << ",Xhat," << B.Xhat[B.ib(n, m, k, c)] << '\n';
                    for (std::size_t i = 0; i < B.d; ++i)
                        os << n << ',' << m << ',' << i << ',' << k << ',' << c << ",alpha," << B.alpha[B.ia(n, m, i, k, c)] << '\n';
                }
                if (n < B.N)
                    for (std::size_t i = 0; i < B.d; ++i)
                        if (c == 0) os << n << ',' << m << ',' << i << ",,,dW," << B.dW[(n * B.M + m) * B.d + i] << '\n';
            }
    for (std::size_t m = 0; m < B.M; ++m)
        for (std::size_t c = 0; c < B.C; ++c)
            for (std::size_t k = 0; k < B.K; ++k) {
                os << B.N << ',' << m << ",," << k << ',' << c << ",XT," << B.XT[B.iT(m, k, c)] << '\n';
                os << B.N << ',' << m << ",," << k << ',' << c << ",XhatT," << B.XhatT[B.iT(m, k, c)] << '\n';
            }
}

}  // namespace tcx::market
