#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "tcx/market/spec.hpp"

namespace tcx::market {

/// Liquidation happens over dT = Δt · kLiquidationFraction just before T.
inline constexpr double kLiquidationFraction = 1e-3;

/// g(v) = κ_p v
inline double permanent_impact(double v, double kappa_p) noexcept { return kappa_p * v; }

/// f(v) = (1 + κ_s sign v) exp(κ_τ v^β), with sign(0) = 0.
inline double temporary_impact(double v, double kappa_s, double kappa_tau, double beta) {
    const double sgn = static_cast<double>((v > 0.0) - (v < 0.0));
    double p;
    if (beta == 1.0) {
        p = v;
    } else {
        if (v < 0.0 && std::floor(beta) != beta)
            throw SpecError("temporary impact: non-integer beta with a negative trade rate");
        p = std::pow(v, beta);
    }
    return (1.0 + kappa_s * sgn) * std::exp(kappa_tau * p);
}

/// Per-step multipliers shared by every path that applies the same controls.
struct StepCoeffs {
    double bank = 1.0;                 // 1 + rΔt
    std::vector<double> price;         // [d]   1 + (drift_i + Σ_k κ_p v_ik)Δt
    std::vector<double> vol;           // [d]   σ_i
    std::vector<double> spend;         // [d*K] v f(v) Δt
};

/// Coefficients of one Euler step for controls v[i*K + k].
inline StepCoeffs step_coeffs(const MarketSpec& s, double dt, const double* v) {
    StepCoeffs c;
    c.bank = 1.0 + s.r * dt;
    c.price.resize(s.d);
    c.vol = s.sigma;
    c.spend.resize(s.d * s.K);
    for (std::size_t i = 0; i < s.d; ++i) {
        double g = 0.0;
        for (std::size_t k = 0; k < s.K; ++k) {
            const auto j = s.ik(i, k);
            g += permanent_impact(v[j], s.kappa_p[j]);
            c.spend[j] = v[j] * temporary_impact(v[j], s.kappa_s[i], s.kappa_tau[j], s.beta[k]) * dt;
        }
        c.price[i] = 1.0 + (s.drift(i) + g) * dt;
    }
    return c;
}

/// Advance one path's prices S[d] and bank accounts b[K]. Holdings are advanced
/// separately because they do not depend on the path.
inline void advance(const StepCoeffs& c, std::size_t d, std::size_t K, const double* dW, double* S, double* b) {
    for (std::size_t k = 0; k < K; ++k) {
        double spent = 0.0;
        for (std::size_t i = 0; i < d; ++i) spent += c.spend[i * K + k] * S[i];
        b[k] = c.bank * b[k] - spent;
    }
    for (std::size_t i = 0; i < d; ++i) S[i] = c.price[i] * S[i] + c.vol[i] * S[i] * dW[i];
}

/// α' = α + vΔt
inline void advance_holdings(std::size_t n, double dt, const double* v, double* alpha) {
    for (std::size_t j = 0; j < n; ++j) alpha[j] += v[j] * dt;
}

/// Coefficients of the forced terminal trade v_T = -α/dT.
struct LiquidationCoeffs {
    double bank = 1.0;          // 1 + r dT
    std::vector<double> spend;  // [d*K] v_T f(v_T) dT
};

inline LiquidationCoeffs liquidation_coeffs(const MarketSpec& s, double dt, const double* alpha) {
    const double dT = dt * kLiquidationFraction;
    LiquidationCoeffs c;
    c.bank = 1.0 + s.r * dT;
    c.spend.resize(s.d * s.K);
    for (std::size_t i = 0; i < s.d; ++i)
        for (std::size_t k = 0; k < s.K; ++k) {
            const auto j = s.ik(i, k);
            const double vT = -alpha[j] / dT;
            c.spend[j] = alpha[j] == 0.0 ? 0.0 : vT * temporary_impact(vT, s.kappa_s[i], s.kappa_tau[j], s.beta[k]) * dT;
        }
    return c;
}

/// Terminal bank accounts (= terminal wealth, holdings are zero afterwards).
inline void liquidate(const LiquidationCoeffs& c, std::size_t d, std::size_t K, const double* S, double* b) {
    for (std::size_t k = 0; k < K; ++k) {
        double spent = 0.0;
        for (std::size_t i = 0; i < d; ++i) spent += c.spend[i * K + k] * S[i];
        b[k] = c.bank * b[k] - spent;
    }
}

/// X̂_k = X_k - φ X̄ with X̄ the cross-agent mean.
inline void relative_wealth(const double* X, std::size_t K, double phi, double* Xhat) {
    double bar = 0.0;
    for (std::size_t k = 0; k < K; ++k) bar += X[k];
    bar /= static_cast<double>(K);
    for (std::size_t k = 0; k < K; ++k) Xhat[k] = X[k] - phi * bar;
}

/// Full state of one path.
struct State {
    std::vector<double> S;      // [d]
    std::vector<double> b;      // [K]
    std::vector<double> alpha;  // [d*K]

    static State initial(const MarketSpec& s) { return State{s.s0, s.b0, s.alpha0}; }
};

/// One Euler step of prices, bank accounts and holdings under controls v[d*K].
inline void step(const MarketSpec& s, double dt, State& x, const std::vector<double>& v, const double* dW) {
    const auto c = step_coeffs(s, dt, v.data());
    advance(c, s.d, s.K, dW, x.S.data(), x.b.data());
    advance_holdings(s.d * s.K, dt, v.data(), x.alpha.data());
}

/// Forced liquidation at T - dT; afterwards α = 0 and b holds terminal wealth.
inline void terminal_liquidation(const MarketSpec& s, double dt, State& x) {
    const auto c = liquidation_coeffs(s, dt, x.alpha.data());
    liquidate(c, s.d, s.K, x.S.data(), x.b.data());
    std::fill(x.alpha.begin(), x.alpha.end(), 0.0);
}

/// X_k = b_k + Σ_i α_ik S_i
inline std::vector<double> wealth(const MarketSpec& s, const State& x) {
    std::vector<double> X(s.K);
    for (std::size_t k = 0; k < s.K; ++k) {
        X[k] = x.b[k];
        for (std::size_t i = 0; i < s.d; ++i) X[k] += x.alpha[s.ik(i, k)] * x.S[i];
    }
    return X;
}

}  // namespace tcx::market
