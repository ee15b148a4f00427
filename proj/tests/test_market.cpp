#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "tcx/market/batch.hpp"
#include "tcx/market/dynamics.hpp"
#include "tcx/market/rng.hpp"
#include "tcx/market/spec.hpp"

using namespace tcx::market;

namespace {

MarketSpec one_asset(double mu, double r, double sigma, double kp = 0.0, double kt = 0.0, double ks = 0.0) {
    MarketSpec s;
    s.mu = {mu};
    s.r = r;
    s.sigma = {sigma};
    s.kappa_p = {kp};
    s.kappa_tau = {kt};
    s.kappa_s = {ks};
    s.s0 = {1.0};
    s.b0 = {0.0};
    s.alpha0 = {1.0};
    return s;
}

MarketSpec two_agents() {
    MarketSpec s;
    s.d = 1;
    s.K = 2;
    s.mu = {0.1};
    s.r = 0.05;
    s.sigma = {0.2};
    s.kappa_p = {5e-4, 0.0};
    s.kappa_tau = {1e-7, 2e-7};
    s.kappa_s = {0.0};
    s.beta = {1.0, 1.0};
    s.gamma = {6.0, 3.0};
    s.s0 = {1.0};
    s.b0 = {0.0, 0.5};
    s.alpha0 = {1.0, 0.5};
    s.T = 1.0 / 250.0;
    return s;
}

}  // namespace

TEST(Impact, PermanentIsLinear) {
    EXPECT_EQ(permanent_impact(0.0, 5e-4), 0.0);
    EXPECT_DOUBLE_EQ(permanent_impact(-1.0, 5e-4), -5e-4);
    EXPECT_EQ(permanent_impact(2.0, 0.0), 0.0);
}

TEST(Impact, TemporaryMultiplier) {
    EXPECT_EQ(temporary_impact(0.0, 0.3, 0.2, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(temporary_impact(1.0, 0.01, 0.0, 1.0), 1.01);
    EXPECT_NEAR(temporary_impact(-1.0, 0.0, 1e-7, 1.0), 0.99999990000000499, 1e-15);
    EXPECT_THROW(temporary_impact(-1.0, 0.0, 1e-7, 1.5), SpecError);
    EXPECT_NO_THROW(temporary_impact(-1.0, 0.0, 1e-7, 2.0));
}

TEST(Impact, ZeroCoefficientsGiveUnitMultiplierAndNoDrift) {
    for (double v : {-1e5, -3.0, 0.0, 2.0, 7e4}) {
        EXPECT_EQ(temporary_impact(v, 0.0, 0.0, 1.0), 1.0);
        EXPECT_EQ(permanent_impact(v, 0.0), 0.0);
    }
}

TEST(Spec, ValidationCatchesBrokenInvariants) {
    auto s = one_asset(0.1, 0.05, 0.2);
    EXPECT_NO_THROW(s.validate());
    auto bad = s;
    bad.gamma = {0.0};
    EXPECT_THROW(bad.validate(), SpecError);
    bad = s;
    bad.phi = 1.0;
    EXPECT_THROW(bad.validate(), SpecError);
    bad = s;
    bad.T = 0.0;
    EXPECT_THROW(bad.validate(), SpecError);
    bad = s;
    bad.sigma = {-0.1};
    EXPECT_THROW(bad.validate(), SpecError);
    MarketSpec two = s;
    two.d = 2;
    two.mu = {0.1, 0.1};
    two.sigma = {0.2, 0.2};
    two.s0 = {1, 1};
    two.kappa_s = {0, 0};
    two.kappa_p = {0, 0};
    two.kappa_tau = {0, 0};
    two.alpha0 = {1, 1};
    two.rho = Eigen::MatrixXd{{1.0, 1.2}, {1.2, 1.0}};
    EXPECT_THROW(two.validate(), MatrixError);
}

TEST(Grid, UniformGridInUnitsOfOneOverT) {
    const auto g = ControlGrid::uniform(-10.0, 0.0, 6, 0.5);
    ASSERT_EQ(g.size(), 6u);
    EXPECT_DOUBLE_EQ(g[0], -20.0);
    EXPECT_DOUBLE_EQ(g[5], 0.0);
    EXPECT_TRUE(g.sell_only);
    EXPECT_NO_THROW(g.validate());
    ControlGrid bad{{0.0, -1.0}, false, false};
    EXPECT_THROW(bad.validate(), SpecError);
    ControlGrid sell{{-1.0, 1.0}, true, false};
    EXPECT_THROW(sell.validate(), SpecError);
}

TEST(Noise, IdentityCorrelationScalesByRootDt) {
    const Eigen::MatrixXd L = MarketSpec::cholesky(Eigen::MatrixXd::Identity(3, 3));
    const double z[3] = {0.5, -1.0, 2.0};
    double dW[3];
    correlate(L, z, 0.1, dW);
    for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(dW[i], z[i] * 0.1);
}

TEST(Noise, HandCholeskyFactor) {
    const Eigen::MatrixXd L = MarketSpec::cholesky(Eigen::MatrixXd{{1.0, 0.7}, {0.7, 1.0}});
    EXPECT_DOUBLE_EQ(L(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(L(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(L(1, 0), 0.7);
    EXPECT_NEAR(L(1, 1), std::sqrt(0.51), 1e-15);
}

TEST(Noise, SampleCovarianceMatchesCorrelation) {
    const Eigen::MatrixXd rho{{1.0, 0.7}, {0.7, 1.0}};
    const Eigen::MatrixXd L = MarketSpec::cholesky(rho);
    const std::size_t M = 1'000'000;
    double s00 = 0, s01 = 0, s11 = 0, m0 = 0, m1 = 0;
    for (std::size_t m = 0; m < M; ++m) {
        const double z[2] = {std_normal(17, m, 0, 0), std_normal(17, m, 0, 1)};
        double w[2];
        correlate(L, z, 1.0, w);
        m0 += w[0], m1 += w[1];
        s00 += w[0] * w[0], s01 += w[0] * w[1], s11 += w[1] * w[1];
    }
    const double n = static_cast<double>(M);
    EXPECT_NEAR(s00 / n - std::pow(m0 / n, 2), 1.0, 0.01);
    EXPECT_NEAR(s11 / n - std::pow(m1 / n, 2), 1.0, 0.01);
    EXPECT_NEAR(s01 / n - m0 * m1 / (n * n), 0.7, 0.01);
}

TEST(Noise, CounterBasedDrawsIgnoreBatchSize) {
    const Eigen::MatrixXd L = Eigen::MatrixXd::Identity(1, 1);
    const NoiseTable small(5, 3, 4, L, 0.01), large(5, 6, 9, L, 0.01);
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t m = 0; m < 4; ++m) EXPECT_EQ(*small.at(n, m), *large.at(n, m));
}

TEST(Noise, AntitheticPairsCancelPerStep) {
    Eigen::MatrixXd L(2, 2);
    L << 1.0, 0.0, 0.6, 0.8;
    const NoiseTable plain(9, 4, 6, L, 0.02), mirrored(9, 4, 6, L, 0.02, true);
    for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t i = 0; i < 2; ++i) {
            double sum = 0.0;
            for (std::size_t m = 0; m < 6; ++m) sum += mirrored.at(n, m)[i];
            EXPECT_NEAR(sum, 0.0, 1e-14);
            EXPECT_EQ(mirrored.at(n, 1)[i], -mirrored.at(n, 0)[i]);
            // even paths reuse the plain draws of index m / 2
            EXPECT_EQ(mirrored.at(n, 4)[i], plain.at(n, 2)[i]);
        }
}

TEST(Step, HoldWithZeroExcessDriftOnlyGrowsBank) {
    auto s = one_asset(0.05, 0.05, 0.0);
    s.b0 = {2.0};
    State x = State::initial(s);
    const double dW = 0.3;
    step(s, 0.01, x, {0.0}, &dW);
    EXPECT_EQ(x.S[0], 1.0);
    EXPECT_EQ(x.alpha[0], 1.0);
    EXPECT_DOUBLE_EQ(x.b[0], 2.0 * (1.0 + 0.05 * 0.01));
}

TEST(Step, PermanentImpactMovesPrice) {
    auto s = one_asset(0.05, 0.05, 0.0, 0.001);
    s.s0 = {100.0};
    State x = State::initial(s);
    const double dW = 0.0;
    step(s, 0.01, x, {1.0}, &dW);
    EXPECT_NEAR(x.S[0], 100.001, 1e-12);
    EXPECT_DOUBLE_EQ(x.alpha[0], 1.01);
    EXPECT_DOUBLE_EQ(x.b[0], -1.0 * 100.0 * 0.01);
}

TEST(Step, TotalDriftModeUsesMuDirectly) {
    auto s = one_asset(0.1, 0.05, 0.0);
    s.drift_mode = DriftMode::Total;
    State x = State::initial(s);
    const double dW = 0.0;
    step(s, 0.1, x, {0.0}, &dW);
    EXPECT_DOUBLE_EQ(x.S[0], 1.01);
}

TEST(Step, NoPerformanceAwarenessLeavesWealthUnchanged) {
    const double X[3] = {1.0, -2.0, 5.0};
    double Xh[3];
    relative_wealth(X, 3, 0.0, Xh);
    for (int k = 0; k < 3; ++k) EXPECT_EQ(Xh[k], X[k]);
    relative_wealth(X, 3, 0.5, Xh);
    EXPECT_DOUBLE_EQ(Xh[0], 1.0 - 0.5 * 4.0 / 3.0);
}

TEST(Liquidation, NothingToSell) {
    auto s = one_asset(0.0, 0.0, 0.0, 0.0, 1e-3);
    s.alpha0 = {0.0};
    s.b0 = {3.0};
    State x = State::initial(s);
    terminal_liquidation(s, 0.01, x);
    EXPECT_EQ(x.b[0], 3.0);
}

TEST(Liquidation, ZeroImpactRecoversFullValue) {
    auto s = one_asset(0.0, 0.0, 0.0);
    s.s0 = {100.0};
    State x = State::initial(s);
    terminal_liquidation(s, 0.01, x);
    EXPECT_NEAR(x.b[0], 100.0, 1e-9);
    EXPECT_EQ(x.alpha[0], 0.0);
}

TEST(Liquidation, TemporaryImpactPenalizesSeller) {
    auto s = one_asset(0.0, 0.0, 0.0, 0.0, 2e-6);
    s.s0 = {100.0};
    State x = State::initial(s);
    terminal_liquidation(s, 0.01, x);
    EXPECT_LT(x.b[0], 100.0);
    // v_T = -1e5, f = exp(-0.2)
    EXPECT_NEAR(x.b[0], 100.0 * std::exp(-0.2), 1e-9);
}

TEST(Batch, SameSeedIsBitwiseIdentical) {
    auto s = two_agents();
    std::vector<ControlGrid> g(2, ControlGrid::uniform(-10, 10, 4, s.T));
    const auto a = generate_batch(s, g, 5, 7, 42), b = generate_batch(s, g, 5, 7, 42);
    EXPECT_EQ(a.S, b.S);
    EXPECT_EQ(a.b, b.b);
    EXPECT_EQ(a.XT, b.XT);
    std::ostringstream oa, ob;
    write_batch_csv(oa, a);
    write_batch_csv(ob, b);
    EXPECT_EQ(oa.str(), ob.str());
}

TEST(Batch, SingleZeroColumnIsPureHold) {
    auto s = one_asset(0.1, 0.05, 0.2, 1e-3, 1e-6);
    ControlGrid g{{0.0}, false, false};
    const auto B = generate_batch(s, {g}, 10, 20, 3);
    const Eigen::MatrixXd L = Eigen::MatrixXd::Identity(1, 1);
    const NoiseTable noise(3, 10, 20, L, B.dt);
    for (std::size_t m = 0; m < 20; ++m) {
        double S = 1.0, b = 0.0;
        for (std::size_t n = 0; n < 10; ++n) {
            b *= 1.0 + 0.05 * B.dt;
            S = (1.0 + 0.05 * B.dt) * S + 0.2 * S * *noise.at(n, m);
            EXPECT_EQ(B.alpha[B.ia(n + 1, m, 0, 0, 0)], 1.0);
        }
        EXPECT_EQ(B.S[B.iS(10, m, 0, 0)], S);
        EXPECT_EQ(B.b[B.ib(10, m, 0, 0)], b);
    }
}

TEST(Batch, HoldingsTelescope) {
    auto s = two_agents();
    std::vector<ControlGrid> g(2, ControlGrid::uniform(-7, 3, 5, s.T));
    const std::size_t N = 13;
    const auto B = generate_batch(s, g, N, 3, 1);
    for (std::size_t c = 0; c < 5; ++c)
        for (std::size_t k = 0; k < 2; ++k) {
            const double a0 = B.alpha[B.ia(0, 1, 0, k, c)];
            const double aN = B.alpha[B.ia(N, 1, 0, k, c)];
            EXPECT_NEAR(aN - a0, B.dt * N * g[k][c], 1e-12);
        }
}

TEST(Batch, BankCompoundsExactlyWithoutTrading) {
    auto s = one_asset(0.1, 0.05, 0.2);
    s.b0 = {1.5};
    ControlGrid g{{0.0}, false, false};
    const auto B = generate_batch(s, {g}, 20, 2, 9);
    double b = 1.5;
    for (std::size_t n = 0; n <= 20; ++n) {
        EXPECT_EQ(B.b[B.ib(n, 1, 0, 0)], b);
        b *= 1.0 + 0.05 * B.dt;
    }
}

TEST(Batch, InactiveAgentNeverMovesPrice) {
    auto s = two_agents();
    s.sigma = {0.0};
    // agent 1 has κ_p = 0, so its rate must not change prices
    std::vector<ControlGrid> g1{ControlGrid{{0.0}, false, false}, ControlGrid{{0.0}, false, false}};
    std::vector<ControlGrid> g2{ControlGrid{{0.0}, false, false}, ControlGrid{{-50.0}, false, false}};
    const auto a = generate_batch(s, g1, 4, 1, 0), b = generate_batch(s, g2, 4, 1, 0);
    EXPECT_EQ(a.S, b.S);
}

TEST(Batch, PermutingAgentsPermutesOutputs) {
    auto s = two_agents();
    auto p = s;
    p.kappa_p = {s.kappa_p[1], s.kappa_p[0]};
    p.kappa_tau = {s.kappa_tau[1], s.kappa_tau[0]};
    p.gamma = {s.gamma[1], s.gamma[0]};
    p.b0 = {s.b0[1], s.b0[0]};
    p.alpha0 = {s.alpha0[1], s.alpha0[0]};
    std::vector<ControlGrid> g{ControlGrid::uniform(-5, 0, 3, s.T), ControlGrid::uniform(-2, 2, 3, s.T)};
    std::vector<ControlGrid> gp{g[1], g[0]};
    const auto A = generate_batch(s, g, 6, 4, 8), P = generate_batch(p, gp, 6, 4, 8);
    EXPECT_EQ(A.S, P.S);
    for (std::size_t m = 0; m < 4; ++m)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(A.XT[A.iT(m, k, c)], P.XT[P.iT(m, 1 - k, c)]);
}

TEST(Batch, EulerMeanMatchesAnalyticWithinStandardErrors) {
    auto s = one_asset(0.08, 0.05, 0.2);
    ControlGrid g{{0.0}, false, false};
    const std::size_t N = 10, M = 100'000;
    const auto B = generate_batch(s, {g}, N, M, 2024);
    double sum = 0, sq = 0;
    for (std::size_t m = 0; m < M; ++m) {
        const double v = B.S[B.iS(N, m, 0, 0)];
        sum += v, sq += v * v;
    }
    const double mean = sum / M, sd = std::sqrt((sq - M * mean * mean) / (M - 1));
    EXPECT_NEAR(mean, std::pow(1.0 + 0.03 * B.dt, static_cast<double>(N)), 3.0 * sd / std::sqrt(double(M)));
}

TEST(Batch, MartingalePriceHasUnitMean) {
    auto s = one_asset(0.05, 0.05, 0.2);
    ControlGrid g{{0.0}, false, false};
    const std::size_t M = 100'000;
    const auto B = generate_batch(s, {g}, 8, M, 77);
    double sum = 0;
    for (std::size_t m = 0; m < M; ++m) sum += B.S[B.iS(8, m, 0, 0)];
    EXPECT_NEAR(sum / M, 1.0, 3.0 * 0.2 * std::sqrt(s.T) / std::sqrt(double(M)));
}
