#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcx::market {

/// A market or grid parameter violates its documented invariant.
struct SpecError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A matrix that must be factorized is not symmetric positive definite.
struct MatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// How μ enters the Euler price step.
///   Excess: S' = (1 + (μ - r + Σκ_p v)Δt) S + ...   (μ is read as a total drift, r is subtracted)
///   Total:  S' = (1 + (μ + Σκ_p v)Δt) S + ...       (μ is the drift of S itself)
enum class DriftMode { Excess, Total };

/// Parameters of the coupled multi-agent, multi-asset market.
/// Per-(asset, agent) arrays are stored row-major as [i * K + k].
struct MarketSpec {
    std::size_t d = 1;
    std::size_t K = 1;
    std::vector<double> mu{0.0};
    double r = 0.0;
    std::vector<double> sigma{0.0};
    Eigen::MatrixXd rho = Eigen::MatrixXd::Identity(1, 1);
    std::vector<double> kappa_p{0.0};
    std::vector<double> kappa_tau{0.0};
    std::vector<double> kappa_s{0.0};
    std::vector<double> beta{1.0};
    std::vector<double> gamma{1.0};
    double phi = 0.0;
    double T = 1.0;
    std::vector<double> s0{1.0};
    std::vector<double> b0{0.0};
    std::vector<double> alpha0{0.0};
    DriftMode drift_mode = DriftMode::Excess;

    [[nodiscard]] std::size_t ik(std::size_t i, std::size_t k) const noexcept { return i * K + k; }

    /// Deterministic part of the price return rate, before permanent impact.
    [[nodiscard]] double drift(std::size_t i) const noexcept {
        return drift_mode == DriftMode::Excess ? mu[i] - r : mu[i];
    }

    /// Initial wealth b0_k + Σ_i α0_ik s0_i.
    [[nodiscard]] double initial_wealth(std::size_t k) const {
        double x = b0[k];
        for (std::size_t i = 0; i < d; ++i) x += alpha0[ik(i, k)] * s0[i];
        return x;
    }

    void validate() const {
        auto need = [](bool ok, const std::string& what) {
            if (!ok) throw SpecError("market: " + what);
        };
        need(d > 0 && K > 0, "d and K must be positive");
        need(mu.size() == d && sigma.size() == d && s0.size() == d && kappa_s.size() == d,
             "per-asset arrays need d entries");
        need(kappa_p.size() == d * K && kappa_tau.size() == d * K && alpha0.size() == d * K,
             "per-(asset, agent) arrays need d*K entries");
        need(beta.size() == K && gamma.size() == K && b0.size() == K, "per-agent arrays need K entries");
        need(rho.rows() == static_cast<Eigen::Index>(d) && rho.cols() == static_cast<Eigen::Index>(d),
             "correlation must be d x d");
        need(T > 0.0, "T must be positive");
        need(phi >= 0.0 && phi < 1.0, "phi must lie in [0, 1)");
        for (std::size_t k = 0; k < K; ++k) {
            need(gamma[k] > 0.0, "gamma must be positive");
            need(beta[k] >= 1.0, "beta must be at least 1");
        }
        for (std::size_t i = 0; i < d; ++i) need(sigma[i] >= 0.0, "sigma must be non-negative");
        for (double v : kappa_tau) need(v >= 0.0, "kappa_tau must be non-negative");
        for (double v : kappa_s) need(v >= 0.0 && v < 1.0, "kappa_s must lie in [0, 1)");
        for (std::size_t i = 0; i < d; ++i) {
            need(std::abs(rho(i, i) - 1.0) < 1e-12, "correlation diagonal must be 1");
            for (std::size_t j = 0; j < d; ++j)
                need(std::abs(rho(i, j) - rho(j, i)) < 1e-12, "correlation must be symmetric");
        }
        (void)cholesky(rho);
    }

    /// Lower Cholesky factor L with L Lᵀ = ρ.
    static Eigen::MatrixXd cholesky(const Eigen::MatrixXd& rho) {
        Eigen::LLT<Eigen::MatrixXd> llt(rho);
        if (llt.info() != Eigen::Success) throw MatrixError("correlation matrix is not positive definite");
        Eigen::MatrixXd L = llt.matrixL();
        return L;
    }
};

/// Uniform grid of trade rates in units of 1/T.
struct ControlGrid {
    std::vector<double> values;
    bool sell_only = false;
    bool buy_only = false;

    /// C points on [lo/T, hi/T].
    static ControlGrid uniform(double lo, double hi, std::size_t C, double T) {
        if (C == 0) throw SpecError("grid: C must be positive");
        if (!(T > 0.0)) throw SpecError("grid: T must be positive");
        if (C > 1 && !(hi > lo)) throw SpecError("grid: need hi > lo");
        ControlGrid g;
        g.values.resize(C);
        for (std::size_t c = 0; c < C; ++c)
            g.values[c] = (C == 1 ? lo : lo + (hi - lo) * static_cast<double>(c) / static_cast<double>(C - 1)) / T;
        g.sell_only = g.values.back() <= 0.0;
        g.buy_only = g.values.front() >= 0.0;
        return g;
    }

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t c) const { return values[c]; }

    void validate() const {
        if (values.empty()) throw SpecError("grid: empty");
        for (std::size_t c = 1; c < values.size(); ++c)
            if (!(values[c] > values[c - 1])) throw SpecError("grid: values must be strictly increasing");
        if (sell_only && values.back() > 0.0) throw SpecError("grid: sell-only grid has a positive rate");
        if (buy_only && values.front() < 0.0) throw SpecError("grid: buy-only grid has a negative rate");
    }
};

}  // namespace tcx::market
