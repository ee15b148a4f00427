#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "tcx/bsde/bsde.hpp"
#include "tcx/bsde/tree.hpp"

using namespace tcx::bsde;
using tcx::market::ControlGrid;
using tcx::market::State;

namespace {

MarketSpec tiny(double kt, double kp = 0.0, double r = 0.03) {
    MarketSpec s;
    s.mu = {0.07};
    s.r = r;
    s.sigma = {0.0};
    s.kappa_p = {kp};
    s.kappa_tau = {kt};
    s.kappa_s = {0.0};
    s.gamma = {2.0};
    s.s0 = {1.0};
    s.alpha0 = {1.0};
    s.T = 1.0;
    return s;
}

// independent brute force: every sequence simulated from scratch, lexicographic order
std::pair<double, std::vector<std::size_t>> brute_force(const MarketSpec& s, const ControlGrid& g, std::size_t N,
                                                        double psi) {
    const double dt = s.T / N;
    const std::size_t C = g.size();
    std::size_t total = 1;
    for (std::size_t n = 0; n < N; ++n) total *= C;
    double best = -INFINITY;
    std::vector<std::size_t> arg;
    for (std::size_t code = 0; code < total; ++code) {
        std::vector<std::size_t> seq(N);
        std::size_t rest = code;
        for (std::size_t n = N; n-- > 0;) seq[n] = rest % C, rest /= C;
        double S = s.s0[0], b = s.b0[0], a = s.alpha0[0];
        for (std::size_t n = 0; n < N; ++n) {
            const double v = g[seq[n]];
            const double f = (1.0 + s.kappa_s[0] * ((v > 0) - (v < 0))) * std::exp(s.kappa_tau[0] * v);
            const double Sn = (1.0 + (s.mu[0] - s.r + s.kappa_p[0] * v) * dt) * S;
            b = (1.0 + s.r * dt) * b - v * S * f * dt;
            a += v * dt;
            S = Sn;
        }
        const double dT = dt * 1e-3, vT = -a / dT;
        const double X = a == 0.0 ? (1.0 + s.r * dT) * b
                                  : (1.0 + s.r * dT) * b - vT * S * std::exp(s.kappa_tau[0] * vT) * dT;
        const double u = (1.0 - s.gamma[0] * psi) * X - 0.5 * s.gamma[0] * X * X;
        if (arg.empty() || u > best + 1e-12 * std::max(1.0, std::abs(best))) best = u, arg = seq;
    }
    return {best, arg};
}

}  // namespace

TEST(Terminal, Examples) {
    EXPECT_EQ(terminal_condition(0.0, 6.0, -1.3), 0.0);
    EXPECT_DOUBLE_EQ(terminal_condition(1.0, 6.0, 0.0), -2.0);
    EXPECT_DOUBLE_EQ(terminal_condition(1.0, 6.0, -1.0), 4.0);
}

TEST(Derivatives, LinearValueHasExactQuotients) {
    ValueFn lin = [](const std::vector<Point>& xs) {
        std::vector<double> u;
        for (const auto& x : xs) u.push_back(3.0 * x.S[0] - 2.0 * x.S[1] + 0.5 * x.b + 7.0 * x.alpha[1]);
        return u;
    };
    // magnitudes of order one keep the cancellation error below 1e-12
    std::vector<Point> xs{{{0.25, 0.5}, 0.125, {0.5, -0.25}}, {{0.75, 0.375}, -0.5, {0.125, 0.0}}};
    std::vector<Bumps> h;
    for (const auto& x : xs) h.push_back(Bumps::standard(x, {1.0, 1.0}));
    const auto D = state_derivatives(lin, xs, h);
    for (std::size_t p = 0; p < 2; ++p) {
        EXPECT_NEAR(D.dS[p * 2 + 0], 3.0, 1e-12);
        EXPECT_NEAR(D.dS[p * 2 + 1], -2.0, 1e-12);
        EXPECT_NEAR(D.db[p], 0.5, 1e-12);
        EXPECT_NEAR(D.dalpha[p * 2 + 0], 0.0, 1e-12);
        EXPECT_NEAR(D.dalpha[p * 2 + 1], 7.0, 1e-12);
    }
}

TEST(Derivatives, ConstantValueHasZeroQuotients) {
    ValueFn cst = [](const std::vector<Point>& xs) { return std::vector<double>(xs.size(), 4.2); };
    std::vector<Point> xs{{{2.0}, 1.0, {1.0}}};
    const auto D = state_derivatives(cst, xs, {Bumps::standard(xs[0], {1.0})});
    EXPECT_EQ(D.dS[0], 0.0);
    EXPECT_EQ(D.db[0], 0.0);
    EXPECT_EQ(D.dalpha[0], 0.0);
}

TEST(Derivatives, ForwardDifferenceOfSquare) {
    ValueFn sq = [](const std::vector<Point>& xs) { return std::vector<double>{xs[0].S[0] * xs[0].S[0]}; };
    std::vector<Point> xs{{{2.0}, 0.0, {0.0}}};
    Bumps h{{0.01}, 1e-3, {1e-3}};
    EXPECT_NEAR(state_derivatives(sq, xs, {h}).dS[0], 4.01, 1e-10);
}

TEST(Derivatives, StandardBumpSizes) {
    const auto h = Bumps::standard(Point{{50.0}, -3.0, {0.2}}, {100.0});
    EXPECT_DOUBLE_EQ(h.dS[0], 0.1);
    EXPECT_DOUBLE_EQ(h.db, 3e-3);
    EXPECT_DOUBLE_EQ(h.dalpha[0], 1e-3);
}

TEST(Drift, Examples) {
    auto s = tiny(1e-3, 1e-3, 0.05);
    const double S = 1.2, b = 1.0;
    double zero[1] = {0.0}, v1[1] = {0.7};
    EXPECT_EQ(bsde_drift(s, 0, &S, &b, v1, LocalDerivs{zero, 0.0, zero}), 0.0);
    auto s0 = s;
    s0.r = 0.0;
    double two[1] = {2.0};
    EXPECT_EQ(bsde_drift(s0, 0, &S, &b, zero, LocalDerivs{two, 2.0, two}), 0.0);
    double dS[1] = {0.0}, da[1] = {0.0};
    EXPECT_DOUBLE_EQ(bsde_drift(s, 0, &S, &b, zero, LocalDerivs{dS, 2.0, da}), -0.1);
}

TEST(Drift, TradingTermsMatchHandSubstitution) {
    MarketSpec s;
    s.K = 2;
    s.mu = {0.1};
    s.r = 0.02;
    s.sigma = {0.3};
    s.kappa_p = {1e-3, 2e-3};
    s.kappa_tau = {1e-2, 0.0};
    s.kappa_s = {0.01};
    s.beta = {1.0, 1.0};
    s.gamma = {1.0, 1.0};
    s.phi = 0.4;
    s.b0 = {0.0, 0.0};
    s.alpha0 = {1.0, 1.0};
    const double S = 2.0, b[2] = {1.0, 3.0}, v[2] = {-2.0, 4.0};
    double dS[1] = {0.5}, da[1] = {-1.5};
    const double Db = 0.8;
    const double fv = (1.0 - 0.01) * std::exp(1e-2 * -2.0);
    const double expect = -0.02 * (1.0 - 0.4 * 2.0) * Db + (-2.0) * fv * S * Db - (-2.0 - 0.4 * 1.0) * (-1.5) -
                          (1e-3 * -2.0 + 2e-3 * 4.0) * S * 0.5;
    EXPECT_NEAR(bsde_drift(s, 0, &S, b, v, LocalDerivs{dS, Db, da}), expect, 1e-15);
}

TEST(Diffusion, Examples) {
    const double sig[1] = {0.2}, zero[1] = {0.0}, d5[1] = {5.0}, w[1] = {0.1};
    EXPECT_EQ(diffusion_term(1, zero, d5, w), 0.0);
    EXPECT_EQ(diffusion_term(1, sig, d5, zero), 0.0);
    EXPECT_NEAR(diffusion_term(1, sig, d5, w), 0.1, 1e-15);
}

TEST(Residual, ExamplesAndLoss) {
    EXPECT_EQ(residual(1.3, 1.3, 0.0, 0.0, 0.1), 0.0);
    EXPECT_DOUBLE_EQ(residual(1.0, 1.0, 2.0, 0.0, 0.5), 1.0);
    EXPECT_EQ(loss({0.0, 0.0, 0.0}), 0.0);
    EXPECT_DOUBLE_EQ(loss({1.0, -3.0}), 5.0);
    EXPECT_GE(loss({1e-3, -2e-4}), 0.0);
}

TEST(Slice, SingleColumnAlwaysSelected) {
    const auto s = backward_step({3.0, -1.0, 2.0}, 3, 1, 0.0);
    EXPECT_EQ(s.v_star, 0u);
    EXPECT_EQ(s.carried(), (std::vector<double>{3.0, -1.0, 2.0}));
}

TEST(Slice, ArgmaxOfMeanWithSmallestIndexOnTies) {
    // column means: 1, 2, 2
    const auto s = backward_step({1.0, 3.0, 1.0, 1.0, 1.0, 3.0}, 2, 3, 0.0);
    EXPECT_EQ(s.v_star, 1u);
    EXPECT_EQ(s.carried(), (std::vector<double>{3.0, 1.0}));
}

TEST(Slice, ZeroDriverCarriesValueUnchanged) {
    std::vector<double> next{0.5, 0.7, 0.1, 0.2};
    const auto s = backward_step(next, 2, 2, 0.0);
    const auto carried = s.carried();
    for (std::size_t m = 0; m < 2; ++m) EXPECT_EQ(carried[m], next[m * 2 + s.v_star]);
}

TEST(Tree, MatchesBruteForceOnDeterministicInstances) {
    for (std::size_t N : {1u, 2u, 3u})
        for (double kt : {1e-3, 5e-2}) {
            auto s = tiny(kt, 2e-3);
            const auto g = ControlGrid::uniform(-2.0, 1.0, 3, s.T);
            const double psi = initial_psi(s, 0);
            const auto tree = tree_backward(s, g, N, 1, 0, psi);
            const auto [best, seq] = brute_force(s, g, N, psi);
            EXPECT_NEAR(tree.value, best, 1e-8) << "N=" << N;
            EXPECT_EQ(tree.controls, seq) << "N=" << N;
        }
}

TEST(Tree, RefusesHugeInstances) {
    auto s = tiny(1e-3);
    EXPECT_THROW(tree_backward(s, ControlGrid::uniform(-1, 1, 10, 1.0), 6, 1, 0, -1.0), tcx::market::SpecError);
}

TEST(Psi, ConstantOutcomeConvergesAfterOneUpdate) {
    const auto r = psi_fixed_point([](double) { return SolveOutcome{1.25, 3.0}; }, -1.0, 2.0);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.psi, -1.25);
    EXPECT_EQ(r.iterations, 2u);
}

TEST(Psi, InfiniteToleranceKeepsInitialGuess) {
    const auto r = psi_fixed_point([](double) { return SolveOutcome{7.0, 1.0}; }, -0.5, 2.0, INFINITY);
    EXPECT_EQ(r.psi, -0.5);
    EXPECT_EQ(r.iterations, 1u);
}

TEST(Psi, NonConvergenceIsReportedNotThrown) {
    // ψ ← -(1 - ψ) oscillates without settling
    const auto r = psi_fixed_point([](double p) { return SolveOutcome{1.0 - 2.0 * p, 0.0}; }, 0.0, 1.0, 1e-6, 5);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 5u);
}

TEST(Psi, DualValueEqualsMeanVarianceAtFixedPoint) {
    // samples of X̂(T); at ψ = -E[X̂], E[U] - γ/2 ψ² = E[X̂] - γ/2 Var(X̂) with population variance
    const std::vector<double> X{1.02, 0.97, 1.10, 1.01, 0.93, 1.05};
    const double gamma = 6.0;
    auto solve = [&](double psi) {
        double mx = 0, mu = 0;
        for (double x : X) mx += x, mu += terminal_condition(x, gamma, psi);
        return SolveOutcome{mx / X.size(), mu / X.size()};
    };
    const auto r = psi_fixed_point(solve, -1.0, gamma);
    double m = 0, v = 0;
    for (double x : X) m += x;
    m /= X.size();
    for (double x : X) v += (x - m) * (x - m);
    v /= X.size();
    EXPECT_NEAR(r.u, m - 0.5 * gamma * v, 1e-12);
}
