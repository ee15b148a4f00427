#pragma once

#include <cstdint>
#include <vector>

#include "tcx/bsde/bsde.hpp"
#include "tcx/market/dynamics.hpp"
#include "tcx/market/rng.hpp"
#include "tcx/market/spec.hpp"

namespace tcx::bsde {

/// Exact backward recursion over the tree of control histories for a single
/// agent. Every node carries the M path states reached by its history; the
/// value of a node is the best child's cross-path mean of the carried value,
/// so the recursion picks one control per history node.
struct TreeResult {
    double value = 0.0;                 // E[U^0] at the root
    std::vector<std::size_t> controls;  // [n * d + i] grid indices along the optimal branch
    std::size_t nodes = 0;
};

namespace detail {

struct TreeCtx {
    const MarketSpec& s;
    const market::ControlGrid& g;
    std::size_t N, M, combos;
    double dt, psi;
    const market::NoiseTable& noise;
    std::size_t nodes = 0;
};

inline void decode(std::size_t combo, std::size_t d, std::size_t C, std::size_t* idx) {
    for (std::size_t i = d; i-- > 0;) {
        idx[i] = combo % C;
        combo /= C;
    }
}

// returns E[U] of the best continuation; writes its controls into `path` from step n on
inline double tree_node(TreeCtx& ctx, std::size_t n, const std::vector<market::State>& states,
                        std::vector<std::size_t>& path) {
    ++ctx.nodes;
    const auto& s = ctx.s;
    if (n == ctx.N) {
        double u = 0.0;
        for (auto x : states) {
            market::terminal_liquidation(s, ctx.dt, x);
            double xh = 0.0;
            market::relative_wealth(x.b.data(), 1, s.phi, &xh);
            u += terminal_condition(xh, s.gamma[0], ctx.psi);
        }
        return u / static_cast<double>(states.size());
    }
    const std::size_t d = s.d, C = ctx.g.size();
    std::vector<double> child(ctx.combos);
    std::vector<std::vector<std::size_t>> tails(ctx.combos, path);
    std::vector<std::size_t> idx(d);
    std::vector<double> v(d);
    for (std::size_t c = 0; c < ctx.combos; ++c) {
        decode(c, d, C, idx.data());
        for (std::size_t i = 0; i < d; ++i) v[i] = ctx.g[idx[i]];
        std::vector<market::State> next = states;
        for (std::size_t m = 0; m < ctx.M; ++m) market::step(s, ctx.dt, next[m], v, ctx.noise.at(n, m));
        child[c] = tree_node(ctx, n + 1, next, tails[c]);
        for (std::size_t i = 0; i < d; ++i) tails[c][n * d + i] = idx[i];
    }
    const std::size_t best = argmax_tiebreak(child.data(), ctx.combos);
    path = std::move(tails[best]);
    return child[best];
}

}  // namespace detail

/// Refuses instances with more than `max_nodes` leaves.
inline TreeResult tree_backward(const MarketSpec& s, const market::ControlGrid& g, std::size_t N, std::size_t M,
                                std::uint64_t seed, double psi, std::size_t max_nodes = 100000) {
    s.validate();
    g.validate();
    if (s.K != 1) throw market::SpecError("tree recursion handles a single agent");
    std::size_t combos = 1;
    for (std::size_t i = 0; i < s.d; ++i) combos *= g.size();
    double leaves = 1.0;
    for (std::size_t n = 0; n < N; ++n) leaves *= static_cast<double>(combos);
    if (leaves > static_cast<double>(max_nodes)) throw market::SpecError("tree recursion: instance too large");
    const double dt = s.T / static_cast<double>(N);
    const market::NoiseTable noise(seed, N, M, MarketSpec::cholesky(s.rho), dt);
    detail::TreeCtx ctx{s, g, N, M, combos, dt, psi, noise};
    std::vector<market::State> root(M, market::State::initial(s));
    TreeResult r;
    r.controls.assign(N * s.d, 0);
    r.value = detail::tree_node(ctx, 0, root, r.controls);
    r.nodes = ctx.nodes;
    return r;
}

}  // namespace tcx::bsde
