#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <cstring>
#include <sstream>

#include "tcx/autograd/adam.hpp"
#include "tcx/autograd/gradcheck.hpp"
#include "tcx/bsde/bsde.hpp"
#include "tcx/net/checkpoint.hpp"
#include "tcx/net/features.hpp"
#include "tcx/net/network.hpp"

using namespace tcx::net;
using tcx::ag::Array;
using tcx::ag::Tape;

namespace {

Array random_array(tcx::ag::Shape s, unsigned seed, double scale = 1.0) {
    std::mt19937 g(seed);
    std::normal_distribution<double> n(0.0, scale);
    Array a(std::move(s));
    for (auto& v : a.values()) v = n(g);
    return a;
}

NetConfig small(std::size_t C = 10) {
    NetConfig c;
    c.C = C;
    c.features = feature_count(1);
    c.seed = 3;
    return c;
}

void zero_unet(ValueNet& net) {
    for (auto& [name, a] : net.params())
        if ((name.rfind("down", 0) == 0 || name.rfind("up", 0) == 0 || name.rfind("out", 0) == 0) &&
            name.find(".gn.") == std::string::npos)
            a.fill(0.0);
}

void randomize_head(ValueNet& net, unsigned seed) {
    net.param("head.w") = random_array({net.config().c_base, 1}, seed, 0.3);
    net.param("head.b")[0] = 0.1;
}

}  // namespace

TEST(NetConfig, RejectsIncompatibleWidths) {
    NetConfig c;
    c.c_base = 18;
    EXPECT_THROW(c.validate(), tcx::ag::ConfigError);
    c.c_base = 12;
    c.heads = 3;
    c.groups = 5;
    EXPECT_THROW(c.validate(), tcx::ag::ConfigError);
    c.groups = 4;
    c.kernel = 4;
    EXPECT_THROW(c.validate(), tcx::ag::ConfigError);
}

TEST(NetConfig, PadsColumnsToSixteen) {
    EXPECT_EQ(small(1).padded_length(), 16u);
    EXPECT_EQ(small(16).padded_length(), 16u);
    EXPECT_EQ(small(17).padded_length(), 32u);
}

TEST(ValueNet, ShapeContractAndZeroHead) {
    for (std::size_t C : {1u, 5u, 16u, 21u}) {
        ValueNet net(small(C));
        const auto X = random_array({7, C, feature_count(1)}, 11);
        Array res;
        const auto F = net.evaluate(X, nullptr, &res);
        EXPECT_EQ(F.shape(), (tcx::ag::Shape{7, C}));
        EXPECT_EQ(res.shape(), (tcx::ag::Shape{7, net.config().padded_length(), 16}));
        for (double f : F.values()) EXPECT_EQ(f, 0.0);
        randomize_head(net, 5);
        EXPECT_TRUE(net.evaluate(X, &res).all_finite());
    }
}

TEST(ValueNet, ZeroHeadReturnsCarriedValue) {
    ValueNet net(small(4));
    const auto X = random_array({3, 4, feature_count(1)}, 2);
    std::vector<double> next{0.1, 0.2, 0.3, 0.4, 1.1, 1.2, 1.3, 1.4, -2.0, -1.0, 0.0, 1.0};
    EXPECT_EQ(approximate_value(next, net.evaluate(X, nullptr)), next);
}

TEST(ValueNet, ZeroInputWithZeroNormAffineGivesZeroAttention) {
    ValueNet net(small(6));
    net.param("attn.gn.gamma").fill(0.0);
    Tape t;
    const auto p = net.named([&] {
        std::vector<tcx::ag::Var> b;
        for (const auto& [_, a] : net.params()) b.push_back(t.constant(a));
        return b;
    }());
    const auto y = net.attend(t, p, t.constant(Array({2, 6, feature_count(1)})));
    for (double v : t.value(y).values()) EXPECT_EQ(v, 0.0);
}

TEST(ValueNet, ZeroQueryKeyGivesUniformAverage) {
    NetConfig c = small(5);
    c.heads = 1;
    c.c_base = 4;
    c.features = 4;
    ValueNet net(c);
    net.param("attn.q0").fill(0.0);
    net.param("attn.k0").fill(0.0);
    for (auto* name : {"attn.v0", "attn.o"}) {
        auto& w = net.param(name);
        w.fill(0.0);
        for (std::size_t i = 0; i < 4; ++i) w[i * 4 + i] = 1.0;
    }
    Tape t;
    std::vector<tcx::ag::Var> b;
    for (const auto& [_, a] : net.params()) b.push_back(t.constant(a));
    const auto X = random_array({2, 5, 4}, 9);
    const auto& y = t.value(net.attention_heads(t, net.named(b), t.constant(X)));
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t j = 0; j < 4; ++j) {
            double avg = 0.0;
            for (std::size_t l = 0; l < 5; ++l) avg += X[(s * 5 + l) * 4 + j] / 5.0;
            for (std::size_t l = 0; l < 5; ++l) EXPECT_NEAR(y[(s * 5 + l) * 4 + j], avg, 1e-14);
        }
}

TEST(ValueNet, UnetPreservesLengthAndMapsZeroToZero) {
    ValueNet net(small());
    Tape t;
    std::vector<tcx::ag::Var> b;
    for (const auto& [_, a] : net.params()) b.push_back(t.constant(a));
    const auto p = net.named(b);
    const auto y = net.unet(t, p, t.constant(random_array({3, 32, 16}, 4)));
    EXPECT_EQ(t.value(y).shape(), (tcx::ag::Shape{3, 32, 16}));
    EXPECT_THROW(net.unet(t, p, t.constant(random_array({3, 24, 16}, 4))), tcx::ag::ConfigError);

    zero_unet(net);
    Tape t2;
    std::vector<tcx::ag::Var> b2;
    for (const auto& [_, a] : net.params()) b2.push_back(t2.constant(a));
    const auto z = net.unet(t2, net.named(b2), t2.constant(random_array({2, 16, 16}, 8)));
    for (double v : t2.value(z).values()) EXPECT_EQ(v, 0.0);
}

TEST(ValueNet, ConvParameterCountMatchesFormula) {
    // each level: k*D*D + D down, and up layers read D (deepest) or 2D channels
    auto formula = [](std::size_t D, std::size_t k, std::size_t levels) {
        std::size_t n = levels * (k * D * D + D);
        n += k * D * D + D;
        n += (levels - 1) * (k * 2 * D * D + D);
        return n;
    };
    NetConfig a = small(), b = small();
    b.c_base = 32;
    const ValueNet na(a), nb(b);
    EXPECT_EQ(na.conv_parameter_count(), formula(16, 3, 4));
    EXPECT_EQ(nb.conv_parameter_count(), formula(32, 3, 4));
    // convolution weights are quadratic in width: doubling c_base scales them by four
    const double ratio = static_cast<double>(nb.conv_parameter_count()) / static_cast<double>(na.conv_parameter_count());
    EXPECT_NEAR(ratio, 4.0, 0.2);
}

TEST(Residual, ZeroCarryIsPureUnetOutput) {
    ValueNet net(small(8));
    randomize_head(net, 1);
    const auto X = random_array({2, 8, feature_count(1)}, 3);
    Array r0({2, 16, 16});
    EXPECT_EQ(net.evaluate(X, nullptr).values(), net.evaluate(X, &r0).values());
}

TEST(Residual, ZeroUnetWithIdentityCarryPassesThrough) {
    ValueNet net(small(8));
    zero_unet(net);
    auto& w = net.param("res.w");
    w.fill(0.0);
    for (std::size_t i = 0; i < 16; ++i) w[i * 16 + i] = 1.0;
    const auto X = random_array({2, 8, feature_count(1)}, 3);
    const auto prev = random_array({2, 16, 16}, 4);
    Array res;
    net.evaluate(X, &prev, &res);
    EXPECT_EQ(res.values(), prev.values());
}

TEST(Residual, ThreeStepsGiveCubedCarry) {
    ValueNet net(small(8));
    zero_unet(net);
    const auto X = random_array({1, 8, feature_count(1)}, 3);
    const auto r0 = random_array({1, 16, 16}, 6);
    Array r = r0, next;
    for (int n = 0; n < 3; ++n) {
        net.evaluate(X, &r, &next);
        r = next;
    }
    const auto& W = net.param("res.w");
    Eigen::Map<const Eigen::Matrix<double, 16, 16, Eigen::RowMajor>> Wm(W.data());
    Eigen::Map<const Eigen::Matrix<double, 16, 16, Eigen::RowMajor>> R0(r0.data());
    const Eigen::Matrix<double, 16, 16, Eigen::RowMajor> expect = R0 * Wm * Wm * Wm;
    for (std::size_t j = 0; j < 256; ++j) EXPECT_NEAR(r[j], expect.data()[j], 1e-12);
}

TEST(ValueNet, PathPermutationPermutesOutputs) {
    ValueNet net(small(6));
    randomize_head(net, 2);
    const std::size_t F = feature_count(1);
    const auto X = random_array({4, 6, F}, 12);
    Array Xp({4, 6, F});
    const std::size_t perm[4] = {2, 0, 3, 1};
    for (std::size_t p = 0; p < 4; ++p)
        std::copy_n(X.data() + perm[p] * 6 * F, 6 * F, Xp.data() + p * 6 * F);
    const auto a = net.evaluate(X, nullptr), b = net.evaluate(Xp, nullptr);
    for (std::size_t p = 0; p < 4; ++p)
        for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(b[p * 6 + c], a[perm[p] * 6 + c]);
}

TEST(Features, LayoutAndNormalization) {
    const double S[2] = {2.0, 50.0}, b[1] = {3.0}, alpha[2] = {1.0, -0.5}, v[3] = {-10.0, 0.0, 10.0};
    const double u[3] = {0.1, 0.2, 0.3};
    const std::size_t path[1] = {4};
    StepInputs in{2, 3, 1, S, b, alpha, v, u, path, 0.25, 1};
    FeatureScales sc{{1.0, 100.0}, 2.0, 0.5, 0.5, 9};
    const auto X = assemble_inputs(in, sc);
    ASSERT_EQ(X.shape(), (tcx::ag::Shape{1, 3, 11}));
    const double* x = X.data() + 2 * 11;
    EXPECT_DOUBLE_EQ(x[0], 2.0);
    EXPECT_DOUBLE_EQ(x[1], 0.5);
    EXPECT_DOUBLE_EQ(x[2], 1.5);
    EXPECT_DOUBLE_EQ(x[3], 0.5);
    EXPECT_DOUBLE_EQ(x[4], -25.0);
    EXPECT_DOUBLE_EQ(x[5], 10.0 * 0.5 * 100.0 / 2.0);
    EXPECT_DOUBLE_EQ(x[6], 0.6);
    EXPECT_DOUBLE_EQ(x[7], 0.5);
    EXPECT_DOUBLE_EQ(x[8], 0.5);
    EXPECT_DOUBLE_EQ(x[9], 1.0);
    EXPECT_DOUBLE_EQ(x[10], 1.0);
}

TEST(Loss, ZeroHeadInitialLossIsDriverDiffusionEnergy) {
    const std::size_t B = 5, C = 4;
    ValueNet net(small(C));
    const auto X = random_array({B, C, feature_count(1)}, 21);
    const auto next = random_array({B * C}, 22), f = random_array({B * C}, 23), z = random_array({B * C}, 24, 0.01);
    const double dt = 0.01;
    Array target({B * C});
    std::vector<double> res;
    double energy = 0.0;
    for (std::size_t j = 0; j < B * C; ++j) {
        target[j] = f[j] * dt - z[j];
        res.push_back(tcx::bsde::residual(next[j], next[j], f[j], z[j], dt));
        energy += target[j] * target[j] / static_cast<double>(B * C);
    }
    Tape t;
    const auto fw = net.forward(t, X, nullptr, true);
    const double l = t.value(correction_loss(t, fw.F, target)).item();
    EXPECT_NEAR(l, energy, 1e-12);
    EXPECT_NEAR(l, tcx::bsde::loss(res), 1e-12);
}

TEST(Loss, SmallAdamStepDecreasesLoss) {
    const std::size_t B = 6, C = 5;
    ValueNet net(small(C));
    const auto X = random_array({B, C, feature_count(1)}, 31);
    const auto target = random_array({B * C}, 32, 0.1);
    auto loss_of = [&](const ValueNet& n) {
        Tape t;
        return t.value(correction_loss(t, n.forward(t, X, nullptr, false).F, target)).item();
    };
    for (int step = 0; step < 3; ++step) {
        const double before = loss_of(net);
        Tape t;
        const auto fw = net.forward(t, X, nullptr, true);
        t.backward(correction_loss(t, fw.F, target));
        std::vector<Array*> ps;
        std::vector<Array> gs;
        for (std::size_t j = 0; j < fw.bound.size(); ++j) {
            ps.push_back(&net.params()[j].second);
            gs.push_back(t.grad(fw.bound[j]));
        }
        tcx::ag::AdamState st;
        tcx::ag::adam_step(ps, gs, st, {1e-6});
        EXPECT_LT(loss_of(net), before);
    }
}

TEST(Gradients, WholeNetworkMatchesFiniteDifferences) {
    NetConfig c;
    c.heads = 2;
    c.c_base = 4;
    c.groups = 2;
    c.levels = 2;
    c.C = 3;
    c.features = 3;
    c.seed = 5;
    ValueNet net(c);
    randomize_head(net, 7);
    const auto X = random_array({2, 3, 3}, 41);
    const auto prev = random_array({2, 4, 4}, 42);
    const auto target = random_array({6}, 43);
    std::vector<Array> params;
    for (const auto& [_, a] : net.params()) params.push_back(a);
    const auto r = tcx::ag::gradient_check(
        [&](Tape& t, const std::vector<tcx::ag::Var>& leaves) {
            return correction_loss(t, net.forward_with(t, X, &prev, leaves).F, target);
        },
        params);
    EXPECT_LT(r.max_rel_err, 1e-4);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    ValueNet net(small(7));
    randomize_head(net, 8);
    const auto X = random_array({3, 7, feature_count(1)}, 51);
    const auto before = net.evaluate(X, nullptr);
    std::stringstream ss;
    save_checkpoint(ss, net, {{"steps", 12}, {"final_loss", 1.5e-6}});
    const auto loaded = load_checkpoint(ss);
    EXPECT_EQ(loaded.meta.at("steps"), 12);
    const auto after = loaded.net.evaluate(X, nullptr);
    ASSERT_EQ(before.size(), after.size());
    for (std::size_t j = 0; j < before.size(); ++j) EXPECT_EQ(std::memcmp(before.data() + j, after.data() + j, sizeof(double)), 0);
    for (std::size_t j = 0; j < net.params().size(); ++j)
        EXPECT_EQ(net.params()[j].second.values(), loaded.net.params()[j].second.values());
}

TEST(Checkpoint, RejectsCorruptInput) {
    std::stringstream bad("NOTACKPT........");
    EXPECT_THROW(load_checkpoint(bad), CheckpointError);
    ValueNet net(small(3));
    std::stringstream ss;
    save_checkpoint(ss, net);
    std::string s = ss.str();
    s.resize(s.size() - 16);
    std::stringstream cut(s);
    EXPECT_THROW(load_checkpoint(cut), CheckpointError);
}
