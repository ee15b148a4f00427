#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "tcx/market/dynamics.hpp"
#include "tcx/market/spec.hpp"

namespace tcx::bsde {

using market::MarketSpec;

/// Relative tolerance under which two candidate values count as tied; ties go
/// to the smallest control index.
inline constexpr double kTieTolerance = 1e-12;

/// U^N = (1 - γψ) X̂ - (γ/2) X̂²
inline double terminal_condition(double xhat, double gamma, double psi) noexcept {
    return (1.0 - gamma * psi) * xhat - 0.5 * gamma * xhat * xhat;
}

/// Index of the largest value, smallest index on ties.
inline std::size_t argmax_tiebreak(const double* v, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < n; ++c)
        if (v[c] > v[best] + kTieTolerance * std::max(1.0, std::abs(v[best]))) best = c;
    return best;
}

// ------------------------------------------------------------------ derivatives

/// State seen by one agent's value function: prices, the agent's bank account
/// and the agent's holdings per asset.
struct Point {
    std::vector<double> S;
    double b = 0.0;
    std::vector<double> alpha;
};

struct Bumps {
    std::vector<double> dS;
    double db = 0.0;
    std::vector<double> dalpha;

    /// ΔS = 1e-3 max(|S|, s0), Δb = 1e-3 max(|b|, 1), Δα = 1e-3 max(|α|, 1)
    static Bumps standard(const Point& x, const std::vector<double>& s0) {
        Bumps h;
        for (std::size_t i = 0; i < x.S.size(); ++i) h.dS.push_back(1e-3 * std::max(std::abs(x.S[i]), s0[i]));
        h.db = 1e-3 * std::max(std::abs(x.b), 1.0);
        for (double a : x.alpha) h.dalpha.push_back(1e-3 * std::max(std::abs(a), 1.0));
        return h;
    }
};

/// Forward bump quotients for a batch of points: dS[p*d + i], db[p], dalpha[p*d + i].
struct DerivativeBundle {
    std::size_t count = 0, d = 0;
    std::vector<double> dS, db, dalpha;
};

/// Batched value function: one value per point.
using ValueFn = std::function<std::vector<double>(const std::vector<Point>&)>;

/// One-sided quotients (U(x + h e_j) - U(x)) / h, re-evaluating `value` at each
/// bumped batch. `bumps[p]` holds the step sizes for point p.
inline DerivativeBundle state_derivatives(const ValueFn& value, const std::vector<Point>& xs,
                                          const std::vector<Bumps>& bumps) {
    DerivativeBundle D;
    D.count = xs.size();
    D.d = xs.empty() ? 0 : xs[0].S.size();
    const auto base = value(xs);
    D.dS.resize(D.count * D.d);
    D.dalpha.resize(D.count * D.d);
    D.db.resize(D.count);
    std::vector<Point> moved = xs;
    for (std::size_t i = 0; i < D.d; ++i) {
        for (std::size_t p = 0; p < D.count; ++p) moved[p].S[i] = xs[p].S[i] + bumps[p].dS[i];
        const auto up = value(moved);
        for (std::size_t p = 0; p < D.count; ++p) {
            D.dS[p * D.d + i] = (up[p] - base[p]) / bumps[p].dS[i];
            moved[p].S[i] = xs[p].S[i];
        }
    }
    for (std::size_t p = 0; p < D.count; ++p) moved[p].b = xs[p].b + bumps[p].db;
    {
        const auto up = value(moved);
        for (std::size_t p = 0; p < D.count; ++p) {
            D.db[p] = (up[p] - base[p]) / bumps[p].db;
            moved[p].b = xs[p].b;
        }
    }
    for (std::size_t i = 0; i < D.d; ++i) {
        for (std::size_t p = 0; p < D.count; ++p) moved[p].alpha[i] = xs[p].alpha[i] + bumps[p].dalpha[i];
        const auto up = value(moved);
        for (std::size_t p = 0; p < D.count; ++p) {
            D.dalpha[p * D.d + i] = (up[p] - base[p]) / bumps[p].dalpha[i];
            moved[p].alpha[i] = xs[p].alpha[i];
        }
    }
    return D;
}

// ------------------------------------------------------------- drift, diffusion

/// Derivatives of agent k's value at one sample.
struct LocalDerivs {
    const double* dS;      // [d]
    double db;
    const double* dalpha;  // [d]
};

/// Driver f for agent k at one sample:
///   f = -r (b_k - φ b̄) D_b + Σ_i v_ik f(v_ik) S_i D_b - Σ_i (v_ik - φ v̄_i) D_α_i - Σ_i g_i S_i D_S_i
/// with b̄, v̄ cross-agent means and g_i = Σ_k' κ_p,ik' v_ik'.
/// S is [d], b is [K], v is [d*K].
inline double bsde_drift(const MarketSpec& s, std::size_t k, const double* S, const double* b, const double* v,
                         const LocalDerivs& D) {
    double b_bar = 0.0;
    for (std::size_t j = 0; j < s.K; ++j) b_bar += b[j];
    b_bar /= static_cast<double>(s.K);
    double f = -s.r * (b[k] - s.phi * b_bar) * D.db;
    for (std::size_t i = 0; i < s.d; ++i) {
        double v_bar = 0.0, g = 0.0;
        for (std::size_t j = 0; j < s.K; ++j) {
            v_bar += v[s.ik(i, j)];
            g += market::permanent_impact(v[s.ik(i, j)], s.kappa_p[s.ik(i, j)]);
        }
        v_bar /= static_cast<double>(s.K);
        const double vk = v[s.ik(i, k)];
        const double fv = market::temporary_impact(vk, s.kappa_s[i], s.kappa_tau[s.ik(i, k)], s.beta[k]);
        f += vk * fv * S[i] * D.db;
        f -= (vk - s.phi * v_bar) * D.dalpha[i];
        f -= g * S[i] * D.dS[i];
    }
    return f;
}

/// Z = Σ_i σ_i D_S_i ΔW_i
inline double diffusion_term(std::size_t d, const double* sigma, const double* dS, const double* dW) noexcept {
    double z = 0.0;
    for (std::size_t i = 0; i < d; ++i) z += sigma[i] * dS[i] * dW[i];
    return z;
}

/// R = U^{n+1} - (Û - fΔt + Z)
inline double residual(double u_next, double u_hat, double f, double z, double dt) noexcept {
    return u_next - (u_hat - f * dt + z);
}

/// Mean squared residual.
inline double loss(const std::vector<double>& residuals) {
    if (residuals.empty()) return 0.0;
    double s = 0.0;
    for (double r : residuals) s += r * r;
    return s / static_cast<double>(residuals.size());
}

// --------------------------------------------------------------- value slices

/// Value samples U[m*C + c] of one agent at one step, the selected column and
/// the dual variable used to produce them.
struct ValueSlice {
    std::size_t M = 0, C = 0;
    std::vector<double> U;
    std::size_t v_star = 0;
    double psi = 0.0;

    /// Per-path value at the selected column.
    [[nodiscard]] std::vector<double> carried() const {
        std::vector<double> out(M);
        for (std::size_t m = 0; m < M; ++m) out[m] = U[m * C + v_star];
        return out;
    }

    /// Cross-path mean per column.
    [[nodiscard]] std::vector<double> column_means() const {
        std::vector<double> mean(C, 0.0);
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t c = 0; c < C; ++c) mean[c] += U[m * C + c];
        for (auto& v : mean) v /= static_cast<double>(M);
        return mean;
    }
};

/// Slice at step n from Û[m*C + c]: the optimal column maximizes the
/// cross-path mean of Û.
inline ValueSlice backward_step(std::vector<double> u_hat, std::size_t M, std::size_t C, double psi) {
    ValueSlice s{M, C, std::move(u_hat), 0, psi};
    const auto mean = s.column_means();
    s.v_star = argmax_tiebreak(mean.data(), C);
    return s;
}

// ------------------------------------------------------------------ dual loop

struct SolveOutcome {
    double mean_xhat = 0.0;  // E[X̂(T)] under the optimal control for the given ψ
    double mean_u0 = 0.0;    // E[U^0]
};

struct PsiResult {
    double psi = 0.0;
    double u = 0.0;  // E[U^0] - (γ/2) ψ²
    std::size_t iterations = 0;
    bool converged = false;
};

/// ψ ← -E[X̂(T)] until the update moves less than tol. Returns the ψ that fed
/// the final solve, so u is consistent with it. Non-convergence is reported
/// through `converged`, not thrown.
inline PsiResult psi_fixed_point(const std::function<SolveOutcome(double)>& solve, double psi0, double gamma,
                                 double tol = 1e-6, std::size_t max_iter = 20) {
    PsiResult res;
    double psi = psi0;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        const auto out = solve(psi);
        const double next = -out.mean_xhat;
        res.iterations = it;
        res.psi = psi;
        res.u = out.mean_u0 - 0.5 * gamma * psi * psi;
        if (std::abs(next - psi) < tol) {
            res.converged = true;
            return res;
        }
        psi = next;
    }
    return res;
}

/// ψ⁰ = -x0 e^{rT}
inline double initial_psi(const MarketSpec& s, std::size_t k) { return -s.initial_wealth(k) * std::exp(s.r * s.T); }

}  // namespace tcx::bsde
