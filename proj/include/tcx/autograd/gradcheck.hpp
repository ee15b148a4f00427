#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tcx/autograd/array.hpp"
#include "tcx/autograd/ops.hpp"
#include "tcx/autograd/tape.hpp"

namespace tcx::ag {

/// Builds a scalar loss on a fresh tape from parameter leaves.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t entries = 0;
};

/// Compare tape gradients against central finite differences with bump
/// h = 1e-5 * max(1, |w|). The relative error per entry is
/// |g_ad - g_fd| / max(1e-6, |g_ad|, |g_fd|).
inline GradCheckResult gradient_check(const LossBuilder& build, std::vector<Array> params) {
    auto evaluate = [&](const std::vector<Array>& ps) {
        Tape t;
        std::vector<Var> leaves;
        for (const auto& p : ps) leaves.push_back(t.param(p));
        return t.value(build(t, leaves)).item();
    };

    Tape t;
    std::vector<Var> leaves;
    for (const auto& p : params) leaves.push_back(t.param(p));
    t.backward(build(t, leaves));

    GradCheckResult res;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const Array g = t.grad(leaves[k]);
        for (std::size_t i = 0; i < params[k].size(); ++i) {
            const double w = params[k][i];
            const double h = 1e-5 * std::max(1.0, std::abs(w));
            params[k][i] = w + h;
            const double up = evaluate(params);
            params[k][i] = w - h;
            const double dn = evaluate(params);
            params[k][i] = w;
            const double fd = (up - dn) / (2.0 * h);
            const double denom = std::max({1e-6, std::abs(g[i]), std::abs(fd)});
            res.max_rel_err = std::max(res.max_rel_err, std::abs(g[i] - fd) / denom);
            ++res.entries;
        }
    }
    return res;
}

struct GradCase {
    std::string name;
    LossBuilder build;
    std::vector<Array> params;
};

/// One case per primitive plus a three-layer composite that chains all of
/// them. Parameters are drawn from U(-1, 1) with the given seed. Losses are
/// contracted against fixed random weights so that every output entry matters.
inline std::vector<GradCase> primitive_cases(unsigned seed = 7) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto rnd = [&](Shape s) {
        Array a(std::move(s));
        for (auto& v : a.values()) v = u(rng);
        return a;
    };
    // weighted sum keeps gradients from collapsing to constants (e.g. softmax rows)
    auto contract = [rnd](Shape s) {
        Array w = rnd(std::move(s));
        return [w](Tape& t, Var y) { return sum(mul(y, t.constant(w))); };
    };

    std::vector<GradCase> cases;
    {
        auto c = contract({2, 3});
        cases.push_back({"add", [c](Tape& t, const std::vector<Var>& p) { return c(t, add(p[0], p[1])); },
                         {rnd({2, 3}), rnd({2, 3})}});
    }
    {
        auto c = contract({2, 3});
        cases.push_back({"sub", [c](Tape& t, const std::vector<Var>& p) { return c(t, sub(p[0], p[1])); },
                         {rnd({2, 3}), rnd({2, 3})}});
    }
    {
        auto c = contract({2, 3});
        cases.push_back({"mul", [c](Tape& t, const std::vector<Var>& p) { return c(t, mul(p[0], p[1])); },
                         {rnd({2, 3}), rnd({2, 3})}});
    }
    {
        auto c = contract({4});
        cases.push_back({"scale", [c](Tape& t, const std::vector<Var>& p) { return c(t, scale(p[0], -2.5)); },
                         {rnd({4})}});
    }
    {
        auto c = contract({2, 5});
        cases.push_back({"swish", [c](Tape& t, const std::vector<Var>& p) { return c(t, swish(p[0])); },
                         {rnd({2, 5})}});
    }
    cases.push_back({"sum", [](Tape&, const std::vector<Var>& p) { return sum(mul(p[0], p[0])); }, {rnd({3, 2})}});
    cases.push_back({"mean", [](Tape&, const std::vector<Var>& p) { return mean(mul(p[0], p[0])); }, {rnd({3, 2})}});
    {
        auto c = contract({2, 3, 4});
        cases.push_back({"affine",
                         [c](Tape& t, const std::vector<Var>& p) { return c(t, affine(p[0], p[1], p[2])); },
                         {rnd({2, 3, 5}), rnd({5, 4}), rnd({4})}});
    }
    {
        auto c = contract({2, 3, 4});
        cases.push_back({"bmm", [c](Tape& t, const std::vector<Var>& p) { return c(t, bmm(p[0], p[1])); },
                         {rnd({2, 3, 5}), rnd({2, 5, 4})}});
    }
    {
        auto c = contract({2, 5, 3});
        cases.push_back({"transpose12", [c](Tape& t, const std::vector<Var>& p) { return c(t, transpose12(p[0])); },
                         {rnd({2, 3, 5})}});
    }
    {
        auto c = contract({3, 6});
        cases.push_back({"softmax", [c](Tape& t, const std::vector<Var>& p) { return c(t, softmax(p[0])); },
                         {rnd({3, 6})}});
    }
    {
        auto c = contract({2, 3, 7});
        cases.push_back({"concat", [c](Tape& t, const std::vector<Var>& p) { return c(t, concat(p[0], p[1])); },
                         {rnd({2, 3, 3}), rnd({2, 3, 4})}});
    }
    {
        auto c = contract({2, 3, 2});
        cases.push_back({"slice_last",
                         [c](Tape& t, const std::vector<Var>& p) { return c(t, slice_last(p[0], 1, 2)); },
                         {rnd({2, 3, 4})}});
    }
    {
        auto c = contract({2, 5, 3});
        cases.push_back({"resize_length",
                         [c](Tape& t, const std::vector<Var>& p) { return c(t, resize_length(p[0], 5)); },
                         {rnd({2, 3, 3})}});
    }
    {
        auto c = contract({2, 4, 5});
        cases.push_back({"conv1d",
                         [c](Tape& t, const std::vector<Var>& p) { return c(t, conv1d(p[0], p[1], p[2], 2, 1)); },
                         {rnd({2, 8, 3}), rnd({3, 3, 5}), rnd({5})}});
    }
    {
        auto c = contract({2, 8, 5});
        cases.push_back(
            {"conv_transpose1d",
             [c](Tape& t, const std::vector<Var>& p) { return c(t, conv_transpose1d(p[0], p[1], p[2], 2, 1, 1)); },
             {rnd({2, 4, 3}), rnd({3, 3, 5}), rnd({5})}});
    }
    {
        auto c = contract({2, 5, 4});
        cases.push_back(
            {"group_norm",
             [c](Tape& t, const std::vector<Var>& p) { return c(t, group_norm(p[0], p[1], p[2], 2, 1e-5)); },
             {rnd({2, 5, 4}), rnd({4}), rnd({4})}});
    }
    {
        // conv -> norm -> swish -> transposed conv -> skip concat -> attention-style mixing
        auto c = contract({2, 8, 4});
        cases.push_back(
            {"composite",
             [c](Tape& t, const std::vector<Var>& p) {
                 Var h = swish(group_norm(conv1d(p[0], p[1], p[2], 2, 1), p[3], p[4], 2, 1e-5));
                 Var up = swish(conv_transpose1d(h, p[5], p[6], 2, 1, 1));
                 Var cat = concat(up, p[0]);
                 Var q = affine(cat, p[7], p[8]);
                 Var a = softmax(scale(bmm(q, transpose12(q)), 0.5));
                 Var mixed = add(bmm(a, q), slice_last(cat, 0, 4));
                 return add(c(t, mixed), mean(mul(h, h)));
             },
             {rnd({2, 8, 3}), rnd({3, 3, 4}), rnd({4}), rnd({4}), rnd({4}), rnd({3, 4, 4}), rnd({4}),
              rnd({7, 4}), rnd({4})}});
    }
    return cases;
}

}  // namespace tcx::ag
