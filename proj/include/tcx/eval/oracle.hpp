#pragma once

#include <cmath>
#include <vector>

#include "tcx/bsde/bsde.hpp"
#include "tcx/market/dynamics.hpp"
#include "tcx/market/spec.hpp"

namespace tcx::eval {

struct OracleResult {
    double value = 0.0;                 // best terminal objective
    std::vector<std::size_t> controls;  // [n * d + i] grid indices
    std::size_t sequences = 0;
};

/// Exhaustive search over every control sequence of a deterministic
/// single-agent market. Sequences are enumerated lexicographically (step 0
/// most significant), so ties resolve to the smallest index sequence.
inline OracleResult dp_oracle(const market::MarketSpec& s, const market::ControlGrid& g, std::size_t N, double psi,
                              std::size_t max_sequences = 10000) {
    s.validate();
    g.validate();
    if (s.K != 1) throw market::SpecError("dp_oracle: single agent only");
    for (double v : s.sigma)
        if (v != 0.0) throw market::SpecError("dp_oracle: needs deterministic dynamics (sigma = 0)");
    const std::size_t C = g.size(), slots = N * s.d;
    double total = 1.0;
    for (std::size_t j = 0; j < slots; ++j) total *= static_cast<double>(C);
    if (total > static_cast<double>(max_sequences)) throw market::SpecError("dp_oracle: instance too large");
    const double dt = s.T / static_cast<double>(N);
    const std::vector<double> zero(s.d, 0.0);
    OracleResult best;
    best.value = -INFINITY;
    std::vector<std::size_t> seq(slots, 0);
    for (std::size_t code = 0; code < static_cast<std::size_t>(total); ++code) {
        std::size_t rest = code;
        for (std::size_t j = slots; j-- > 0;) seq[j] = rest % C, rest /= C;
        auto x = market::State::initial(s);
        std::vector<double> v(s.d);
        for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t i = 0; i < s.d; ++i) v[i] = g[seq[n * s.d + i]];
            market::step(s, dt, x, v, zero.data());
        }
        market::terminal_liquidation(s, dt, x);
        double xh = 0.0;
        market::relative_wealth(x.b.data(), 1, s.phi, &xh);
        const double u = bsde::terminal_condition(xh, s.gamma[0], psi);
        if (best.controls.empty() || u > best.value + bsde::kTieTolerance * std::max(1.0, std::abs(best.value)))
            best.value = u, best.controls = seq;
        ++best.sequences;
    }
    return best;
}

}  // namespace tcx::eval
