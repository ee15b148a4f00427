#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tcx/market/dynamics.hpp"
#include "tcx/market/rng.hpp"
#include "tcx/market/spec.hpp"

namespace tcx::eval {

using market::MarketSpec;

/// Terminal statistics of one agent. Variances are unbiased (n - 1).
struct Objective {
    double mean = 0.0;     // E[X̂(T)]
    double var = 0.0;      // Var[X̂(T)]
    double J = 0.0;        // mean - (γ/2) var
    double se_mean = 0.0;  // standard error of mean
    double se_J = 0.0;     // delta-method standard error of J
};

/// Per-agent objectives plus the raw samples they came from.
struct McResult {
    std::vector<Objective> agents;              // [K]
    std::vector<std::vector<double>> X;         // [K][M] terminal wealth
    std::vector<std::vector<double>> Xhat;      // [K][M] relative terminal wealth
    std::vector<std::vector<double>> hold;      // [K][M] Σ_i α0_ik S_i(T) on the realized prices
};

inline Objective summarize(const std::vector<double>& x, double gamma) {
    const double n = static_cast<double>(x.size());
    if (x.size() < 2) throw std::invalid_argument("summarize: need at least two samples");
    Objective o;
    for (double v : x) o.mean += v;
    o.mean /= n;
    for (double v : x) o.var += (v - o.mean) * (v - o.mean);
    o.var /= n - 1.0;
    o.J = o.mean - 0.5 * gamma * o.var;
    o.se_mean = std::sqrt(o.var / n);
    // influence of each sample on J
    double mi = 0.0, vi = 0.0;
    std::vector<double> infl(x.size());
    for (std::size_t m = 0; m < x.size(); ++m) {
        infl[m] = x[m] - 0.5 * gamma * (x[m] - o.mean) * (x[m] - o.mean);
        mi += infl[m];
    }
    mi /= n;
    for (double v : infl) vi += (v - mi) * (v - mi);
    o.se_J = std::sqrt(vi / (n - 1.0) / n);
    return o;
}

namespace detail {

inline McResult finish(const MarketSpec& s, std::vector<std::vector<double>> X, std::vector<std::vector<double>> hold) {
    const std::size_t K = s.K, M = X[0].size();
    McResult r;
    r.Xhat.assign(K, std::vector<double>(M));
    std::vector<double> x(K), xh(K);
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t k = 0; k < K; ++k) x[k] = X[k][m];
        market::relative_wealth(x.data(), K, s.phi, xh.data());
        for (std::size_t k = 0; k < K; ++k) r.Xhat[k][m] = xh[k];
    }
    for (std::size_t k = 0; k < K; ++k) r.agents.push_back(summarize(r.Xhat[k], s.gamma[k]));
    r.X = std::move(X);
    r.hold = std::move(hold);
    return r;
}

}  // namespace detail

/// Fresh-path simulation of an open-loop schedule v[n][i*K + k] (n < N) with
/// the full impact dynamics and forced terminal liquidation.
inline McResult mc_objective(const MarketSpec& s, const std::vector<double>& v, std::size_t N, std::size_t M,
                             std::uint64_t seed) {
    s.validate();
    const std::size_t d = s.d, K = s.K, dK = d * K;
    if (v.size() != N * dK) throw market::SpecError("mc_objective: schedule needs N*d*K controls");
    const double dt = s.T / static_cast<double>(N);
    const market::NoiseTable noise(seed, N, M, MarketSpec::cholesky(s.rho), dt);
    std::vector<market::StepCoeffs> co;
    std::vector<double> alpha = s.alpha0;
    for (std::size_t n = 0; n < N; ++n) {
        co.push_back(market::step_coeffs(s, dt, &v[n * dK]));
        market::advance_holdings(dK, dt, &v[n * dK], alpha.data());
    }
    const auto liq = market::liquidation_coeffs(s, dt, alpha.data());
    std::vector<std::vector<double>> X(K, std::vector<double>(M)), hold(K, std::vector<double>(M));
    std::vector<double> S(d), b(K);
    for (std::size_t m = 0; m < M; ++m) {
        S = s.s0;
        b = s.b0;
        for (std::size_t n = 0; n < N; ++n) market::advance(co[n], d, K, noise.at(n, m), S.data(), b.data());
        market::liquidate(liq, d, K, S.data(), b.data());
        for (std::size_t k = 0; k < K; ++k) {
            X[k][m] = b[k];
            double h = 0.0;
            for (std::size_t i = 0; i < d; ++i) h += s.alpha0[s.ik(i, k)] * S[i];
            hold[k][m] = h;
        }
    }
    return detail::finish(s, std::move(X), std::move(hold));
}

/// Holdings in shares [i*K + k] as a function of (t, wealth X[K], prices S[d]).
using Allocation = std::function<std::vector<double>(double, const std::vector<double>&, const std::vector<double>&)>;

/// Frictionless simulation of a feedback allocation rebalanced at every step:
/// b = X - α·S, then S and b advance one Euler step and X' = b' + α·S'.
inline McResult mc_feedback(const MarketSpec& s, const Allocation& alloc, std::size_t N, std::size_t M,
                            std::uint64_t seed) {
    s.validate();
    const std::size_t d = s.d, K = s.K;
    const double dt = s.T / static_cast<double>(N);
    const market::NoiseTable noise(seed, N, M, MarketSpec::cholesky(s.rho), dt);
    std::vector<std::vector<double>> X(K, std::vector<double>(M)), hold(K, std::vector<double>(M));
    std::vector<double> S(d), x(K);
    for (std::size_t m = 0; m < M; ++m) {
        S = s.s0;
        for (std::size_t k = 0; k < K; ++k) x[k] = s.initial_wealth(k);
        for (std::size_t n = 0; n < N; ++n) {
            const auto a = alloc(static_cast<double>(n) * dt, x, S);
            const double* dW = noise.at(n, m);
            std::vector<double> S1(d);
            for (std::size_t i = 0; i < d; ++i) S1[i] = S[i] * (1.0 + s.drift(i) * dt + s.sigma[i] * dW[i]);
            for (std::size_t k = 0; k < K; ++k) {
                double risky = 0.0, risky1 = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    risky += a[s.ik(i, k)] * S[i];
                    risky1 += a[s.ik(i, k)] * S1[i];
                }
                x[k] = (1.0 + s.r * dt) * (x[k] - risky) + risky1;
            }
            S = S1;
        }
        for (std::size_t k = 0; k < K; ++k) {
            X[k][m] = x[k];
            double h = 0.0;
            for (std::size_t i = 0; i < d; ++i) h += s.alpha0[s.ik(i, k)] * S[i];
            hold[k][m] = h;
        }
    }
    return detail::finish(s, std::move(X), std::move(hold));
}

// ------------------------------------------------------------- closed forms

/// Optimal dollar allocation α*(t) = [BBᵀ]⁻¹ Aᵀ (γ/2 e^{-r(T-t)} - X(t)).
/// A holds excess drifts [d], BBᵀ is the d x d instantaneous covariance.
inline Eigen::VectorXd mv_portfolio_alpha(const Eigen::VectorXd& A, const Eigen::MatrixXd& BBt, double gamma, double r,
                                     double T, double t, double X) {
    if (BBt.rows() != A.size() || BBt.cols() != A.size()) throw market::MatrixError("mv_portfolio_alpha: shape mismatch");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(BBt);
    if (!lu.isInvertible()) throw market::MatrixError("mv_portfolio_alpha: BBᵀ is singular");
    return lu.solve(A) * (0.5 * gamma * std::exp(-r * (T - t)) - X);
}

/// α*_k = μ_k/(γ_k σ_k²) + (φ_k/σ_k) (1/K) Σ_j μ_j / (γ_j σ_j (1 - φ_j))
inline std::vector<double> relative_perf_alpha(const std::vector<double>& mu, const std::vector<double>& gamma,
                                         const std::vector<double>& sigma, const std::vector<double>& phi) {
    const std::size_t K = mu.size();
    if (gamma.size() != K || sigma.size() != K || phi.size() != K)
        throw std::invalid_argument("relative_perf_alpha: per-agent arrays differ in length");
    double mean = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
        if (!(sigma[j] > 0.0) || !(phi[j] < 1.0)) throw std::invalid_argument("relative_perf_alpha: need σ > 0 and φ < 1");
        mean += mu[j] / (gamma[j] * sigma[j] * (1.0 - phi[j]));
    }
    mean /= static_cast<double>(K);
    std::vector<double> a(K);
    for (std::size_t k = 0; k < K; ++k) a[k] = mu[k] / (gamma[k] * sigma[k] * sigma[k]) + phi[k] / sigma[k] * mean;
    return a;
}

/// |actual - approx| / |actual| in percent.
inline double rel_error(double actual, double approx) {
    if (actual == 0.0) throw std::domain_error("rel_error: actual value is zero");
    return std::abs(actual - approx) / std::abs(actual) * 100.0;
}

}  // namespace tcx::eval
