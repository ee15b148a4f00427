#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcx/autograd/adam.hpp"
#include "tcx/bsde/bsde.hpp"
#include "tcx/market/dynamics.hpp"
#include "tcx/market/rng.hpp"
#include "tcx/market/spec.hpp"
#include "tcx/net/features.hpp"
#include "tcx/net/network.hpp"

namespace tcx::solver {

using market::ControlGrid;
using market::MarketSpec;

/// Training produced NaN or Inf.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Statistic maximized over control columns: the cross-path mean of the
/// carried value U^{n+1}, or of the network approximation Û = U^{n+1} + F.
/// Column statistic used to pick the control at each slice. Carried: mean
/// carried value at the epoch's ψ. Approx: carried value plus the network
/// correction. Dual: ψ maximised per column, i.e. E[X̂] - γ/2 Var[X̂].
enum class Decision { Carried, Approx, Dual };

struct SolverConfig {
    std::size_t N = 100;
    std::size_t M = 1000;
    std::vector<ControlGrid> grids;  // one per agent, equal lengths
    std::size_t max_epochs = 5000;
    double loss_threshold = 5e-6;
    double lr = 1e-4;
    std::size_t ensemble = 1;
    std::uint64_t seed = 1;
    bool use_net = true;
    std::size_t net_paths = 64;
    Decision decision = Decision::Carried;
    bool antithetic = true;  // mirrored training paths
    double psi_tol = 1e-6;
    std::size_t infer_sweeps = 2;
    std::size_t heads = 4, c_base = 16, kernel = 3, groups = 4;

    [[nodiscard]] std::size_t C() const { return grids.empty() ? 0 : grids[0].size(); }

    void validate(const MarketSpec& s) const {
        auto need = [](bool ok, const std::string& what) {
            if (!ok) throw market::SpecError("solver: " + what);
        };
        s.validate();
        need(N > 0 && M > 0, "N and M must be positive");
        need(grids.size() == s.K, "need one control grid per agent");
        for (const auto& g : grids) {
            g.validate();
            need(g.size() == C(), "control grids must share the point count");
        }
        need(ensemble >= 1, "ensemble size must be at least 1");
        need(loss_threshold > 0.0, "loss threshold must be positive");
        need(max_epochs >= 1, "max_epochs must be positive");
        need(lr >= 0.0, "learning rate must be non-negative");
        need(!use_net || (net_paths >= 1 && net_paths <= M), "net_paths must lie in [1, M]");
        need(use_net || decision != Decision::Approx, "the approximate decision needs the network");
    }

    [[nodiscard]] net::NetConfig net_config(std::size_t d, std::uint64_t net_seed) const {
        net::NetConfig c;
        c.heads = heads;
        c.c_base = c_base;
        c.kernel = kernel;
        c.groups = groups;
        c.C = C();
        c.features = net::feature_count(d);
        c.seed = net_seed;
        return c;
    }
};

/// Target holdings α̂[n][i][k] for n = 0..N; row 0 holds α0.
struct Policy {
    std::size_t N = 0, d = 0, K = 0;
    std::vector<double> target;

    static Policy hold(const MarketSpec& s, std::size_t N) {
        Policy p{N, s.d, s.K, {}};
        for (std::size_t n = 0; n <= N; ++n) p.target.insert(p.target.end(), s.alpha0.begin(), s.alpha0.end());
        return p;
    }
    double& at(std::size_t n, std::size_t i, std::size_t k) { return target[(n * d + i) * K + k]; }
    [[nodiscard]] double at(std::size_t n, std::size_t i, std::size_t k) const { return target[(n * d + i) * K + k]; }
    bool operator==(const Policy&) const = default;
};

/// Grid column whose one-step holding lands closest to `target`; smallest index on ties.
inline std::size_t track(const ControlGrid& g, double alpha, double target, double dt) {
    std::size_t best = 0;
    double gap = std::abs(alpha + g[0] * dt - target);
    const double tol = bsde::kTieTolerance * std::max(1.0, std::abs(target));
    for (std::size_t c = 1; c < g.size(); ++c) {
        const double e = std::abs(alpha + g[c] * dt - target);
        if (e < gap - tol) best = c, gap = e;
    }
    return best;
}

/// Controls and holdings obtained by tracking a policy from α0.
struct Schedule {
    std::size_t N = 0, dK = 0;
    std::vector<double> v;         // [n][i*K + k], n < N
    std::vector<std::size_t> idx;  // grid columns, same layout
    std::vector<double> alpha;     // [n][i*K + k], n <= N

    [[nodiscard]] const double* v_at(std::size_t n) const { return &v[n * dK]; }
    [[nodiscard]] const double* alpha_at(std::size_t n) const { return &alpha[n * dK]; }
};

inline Schedule make_schedule(const MarketSpec& s, const std::vector<ControlGrid>& grids, const Policy& p) {
    const double dt = s.T / static_cast<double>(p.N);
    Schedule sc{p.N, s.d * s.K, {}, {}, s.alpha0};
    sc.v.resize(p.N * sc.dK);
    sc.idx.resize(p.N * sc.dK);
    sc.alpha.resize((p.N + 1) * sc.dK);
    for (std::size_t n = 0; n < p.N; ++n)
        for (std::size_t i = 0; i < s.d; ++i)
            for (std::size_t k = 0; k < s.K; ++k) {
                const auto j = s.ik(i, k);
                const auto c = track(grids[k], sc.alpha[n * sc.dK + j], p.at(n + 1, i, k), dt);
                sc.idx[n * sc.dK + j] = c;
                sc.v[n * sc.dK + j] = grids[k][c];
                sc.alpha[(n + 1) * sc.dK + j] = sc.alpha[n * sc.dK + j] + grids[k][c] * dt;
            }
    return sc;
}

/// Column means of one decision slice.
struct SliceOut {
    std::vector<double> mean_y;  // [C] cross-path mean of the carried value
    std::vector<double> mean_f;  // [C] mean correction over the network paths (zeros without a network)
    std::vector<double> mean_x;  // [C] E[X̂(T)]
    std::vector<double> var_x;   // [C] unbiased variance of X̂(T)
    double loss = 0.0;           // slice loss when training
};

/// Per-agent state of one backward sweep.
struct AgentSweep {
    std::size_t k = 0;
    std::vector<ag::Array> res;    // per asset: residual features from step n+1 (size 0 at the terminal step)
    std::vector<ag::Array> grad;   // accumulated parameter gradients
    double loss = 0.0;
    std::vector<double> slice_loss;  // in processing order (n descending, assets ascending)
};

/// One ensemble member: its noise, networks and the on-policy states of the
/// current epoch.
class Member {
public:
    Member(const MarketSpec& s, const SolverConfig& cfg, std::uint64_t seed)
        : s_(s), cfg_(cfg), seed_(seed), dt_(s.T / static_cast<double>(cfg.N)),
          noise_(seed, cfg.N, cfg.M, MarketSpec::cholesky(s.rho), dt_, cfg.antithetic) {
        if (cfg.use_net) {
            for (std::size_t k = 0; k < s.K; ++k)
                nets.emplace_back(cfg.net_config(s.d, market::splitmix64(seed ^ (0x51ED0000ULL + k))));
            adam.resize(s.K);
            const std::size_t P = cfg.net_paths;
            for (std::size_t p = 0; p < P; ++p) rows_.push_back(p * cfg.M / P);
        }
        x_ref_.resize(s.K);
        for (std::size_t k = 0; k < s.K; ++k) {
            double x = std::abs(s.b0[k]);
            for (std::size_t i = 0; i < s.d; ++i) x += std::abs(s.alpha0[s.ik(i, k)]) * s.s0[i];
            x_ref_[k] = std::max(1.0, x);
        }
        psi.resize(s.K);
        for (std::size_t k = 0; k < s.K; ++k) psi[k] = bsde::initial_psi(s, k);
        u_scale_.resize(s.K);
        std::vector<double> X0(s.K), Xh(s.K);
        for (std::size_t k = 0; k < s.K; ++k) X0[k] = s.initial_wealth(k);
        market::relative_wealth(X0.data(), s.K, s.phi, Xh.data());
        for (std::size_t k = 0; k < s.K; ++k)
            u_scale_[k] = std::max(1.0, std::abs(bsde::terminal_condition(Xh[k], s.gamma[k], psi[k])));
    }

    std::vector<net::ValueNet> nets;
    std::vector<ag::AdamState> adam;
    std::vector<double> psi;
    Schedule base;

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] const market::NoiseTable& noise() const noexcept { return noise_; }

    /// Simulate every path under the policy; returns E[X̂_k(T)] per agent.
    std::vector<double> forward(const Policy& p) {
        const std::size_t N = cfg_.N, M = cfg_.M, d = s_.d, K = s_.K;
        base = make_schedule(s_, cfg_.grids, p);
        S_.assign((N + 1) * M * d, 0.0);
        b_.assign((N + 1) * M * K, 0.0);
        std::vector<market::StepCoeffs> co;
        for (std::size_t n = 0; n < N; ++n) co.push_back(market::step_coeffs(s_, dt_, base.v_at(n)));
        const auto liq = market::liquidation_coeffs(s_, dt_, base.alpha_at(N));
        std::vector<double> mean(K, 0.0), Xh(K);
        for (std::size_t m = 0; m < M; ++m) {
            double* S = &S_[m * d];
            double* b = &b_[m * K];
            std::copy(s_.s0.begin(), s_.s0.end(), S);
            std::copy(s_.b0.begin(), s_.b0.end(), b);
            for (std::size_t n = 0; n < N; ++n) {
                double* S1 = &S_[((n + 1) * M + m) * d];
                double* b1 = &b_[((n + 1) * M + m) * K];
                std::copy_n(&S_[(n * M + m) * d], d, S1);
                std::copy_n(&b_[(n * M + m) * K], K, b1);
                market::advance(co[n], d, K, noise_.at(n, m), S1, b1);
            }
            std::vector<double> bT(&b_[(N * M + m) * K], &b_[(N * M + m) * K] + K);
            market::liquidate(liq, d, K, &S_[(N * M + m) * d], bT.data());
            market::relative_wealth(bT.data(), K, s_.phi, Xh.data());
            for (std::size_t k = 0; k < K; ++k) mean[k] += Xh[k];
        }
        for (auto& x : mean) x /= static_cast<double>(M);
        for (double x : mean)
            if (!std::isfinite(x)) throw DivergenceError("forward simulation produced a non-finite wealth");
        return mean;
    }

    AgentSweep start_sweep(std::size_t k) const {
        AgentSweep sw;
        sw.k = k;
        sw.res.resize(s_.d);
        if (cfg_.use_net)
            for (const auto& [_, a] : nets[k].params()) sw.grad.emplace_back(a.shape());
        return sw;
    }

    /// Branch every grid column of asset i for agent k at step n, follow the
    /// policy `own` (agent k) and the epoch's schedule (other agents) to T and
    /// return the column statistics. With `train`, also accumulates the
    /// network loss gradient of this slice into `sw`.
    SliceOut slice(AgentSweep& sw, const Policy& own, std::size_t n, std::size_t i, bool train) {
        const std::size_t N = cfg_.N, M = cfg_.M, d = s_.d, K = s_.K, C = cfg_.C(), k = sw.k, dK = d * K;
        const auto& g = cfg_.grids[k];
        const std::size_t rows = N - n;

        // deterministic control sequences and final holdings per column
        std::vector<double> seq(C * rows * dK), alphaN(C * dK);
        std::vector<double> a(dK);
        for (std::size_t c = 0; c < C; ++c) {
            std::copy_n(base.alpha_at(n), dK, a.begin());
            for (std::size_t j = n; j < N; ++j) {
                double* row = &seq[(c * rows + (j - n)) * dK];
                std::copy_n(base.v_at(j), dK, row);
                for (std::size_t q = 0; q < d; ++q) {
                    const auto jk = s_.ik(q, k);
                    row[jk] = (j == n && q == i) ? g[c] : g[track(g, a[jk], own.at(j + 1, q, k), dt_)];
                }
                for (std::size_t q = 0; q < d; ++q) {
                    const auto jk = s_.ik(q, k);
                    a[jk] += row[jk] * dt_;
                }
            }
            for (std::size_t q = 0; q < dK; ++q) alphaN[c * dK + q] = (q % K == k) ? a[q] : base.alpha_at(N)[q];
        }
        std::vector<std::vector<market::StepCoeffs>> co(C);
        std::vector<market::LiquidationCoeffs> liq;
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t r = 0; r < rows; ++r) co[c].push_back(market::step_coeffs(s_, dt_, &seq[(c * rows + r) * dK]));
            liq.push_back(market::liquidation_coeffs(s_, dt_, &alphaN[c * dK]));
        }

        SliceOut out;
        out.mean_y.assign(C, 0.0);
        out.mean_f.assign(C, 0.0);
        out.mean_x.assign(C, 0.0);
        out.var_x.assign(C, 0.0);
        std::vector<double> Y(M * C), Xh(M * C);
        std::vector<double> S(d), b(K);
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t c = 0; c < C; ++c) {
                std::copy_n(&S_[(n * M + m) * d], d, S.begin());
                std::copy_n(&b_[(n * M + m) * K], K, b.begin());
                Xh[m * C + c] = rollout_wealth(n, m, S, b, co[c], liq[c], k);
                Y[m * C + c] = bsde::terminal_condition(Xh[m * C + c], s_.gamma[k], psi[k]);
                out.mean_y[c] += Y[m * C + c];
                out.mean_x[c] += Xh[m * C + c];
            }
        for (std::size_t c = 0; c < C; ++c) {
            out.mean_x[c] /= static_cast<double>(M);
            double ss = 0.0;
            for (std::size_t m = 0; m < M; ++m) ss += (Xh[m * C + c] - out.mean_x[c]) * (Xh[m * C + c] - out.mean_x[c]);
            out.var_x[c] = M > 1 ? ss / static_cast<double>(M - 1) : 0.0;
        }
        for (auto& y : out.mean_y) {
            y /= static_cast<double>(M);
            if (!std::isfinite(y)) throw DivergenceError("non-finite carried value");
        }
        if (!cfg_.use_net) return out;

        // network correction on the path subset, with bumped values for the driver
        const std::size_t P = rows_.size(), nb = train ? 2 * d + 1 : 0;
        const auto& alpha_n = base.alpha_at(n);
        std::vector<double> ak(d);
        for (std::size_t q = 0; q < d; ++q) ak[q] = alpha_n[s_.ik(q, k)];
        std::vector<bsde::Bumps> h(P);
        std::vector<double> Sp(P * d), bp(P), Ub((nb + 1) * P * C);
        for (std::size_t p = 0; p < P; ++p) {
            const std::size_t m = rows_[p];
            std::copy_n(&S_[(n * M + m) * d], d, &Sp[p * d]);
            bp[p] = b_[(n * M + m) * K + k];
            h[p] = bsde::Bumps::standard(bsde::Point{std::vector<double>(&Sp[p * d], &Sp[p * d] + d), bp[p], ak}, s_.s0);
            for (std::size_t c = 0; c < C; ++c) Ub[p * C + c] = Y[m * C + c];
        }
        // bump u = 0..d-1: S_u; u = d: b_k; u = d+1..2d: α_(u-d-1),k
        for (std::size_t u = 0; u < nb; ++u)
            for (std::size_t c = 0; c < C; ++c) {
                market::LiquidationCoeffs lq = liq[c];
                if (u > d) {
                    std::vector<double> aN(&alphaN[c * dK], &alphaN[c * dK] + dK);
                    aN[s_.ik(u - d - 1, k)] += h[0].dalpha[u - d - 1];
                    lq = market::liquidation_coeffs(s_, dt_, aN.data());
                }
                for (std::size_t p = 0; p < P; ++p) {
                    const std::size_t m = rows_[p];
                    std::copy_n(&S_[(n * M + m) * d], d, S.begin());
                    std::copy_n(&b_[(n * M + m) * K], K, b.begin());
                    if (u < d) S[u] += h[p].dS[u];
                    if (u == d) b[k] += h[p].db;
                    Ub[((u + 1) * P + p) * C + c] = rollout(n, m, S, b, co[c], lq, k);
                }
            }

        const std::size_t F = net::feature_count(d);
        net::FeatureScales sc{s_.s0, x_ref_[k], u_scale_[k], s_.T, M};
        ag::Array X({(nb + 1) * P, C, F});
        std::vector<double> Sx(P * d), bx(P), ax(P * d);
        for (std::size_t u = 0; u <= nb; ++u) {
            for (std::size_t p = 0; p < P; ++p) {
                for (std::size_t q = 0; q < d; ++q) {
                    Sx[p * d + q] = Sp[p * d + q];
                    ax[p * d + q] = ak[q];
                }
                bx[p] = bp[p];
                if (u >= 1 && u <= d) Sx[p * d + u - 1] += h[p].dS[u - 1];
                if (u == d + 1) bx[p] += h[p].db;
                if (u > d + 1) ax[p * d + u - d - 2] += h[p].dalpha[u - d - 2];
            }
            net::StepInputs in{d, C, P, Sx.data(), bx.data(), ax.data(), g.values.data(), &Ub[u * P * C],
                               rows_.data(), static_cast<double>(n) * dt_, i};
            const auto Xu = net::assemble_inputs(in, sc);
            std::copy(Xu.values().begin(), Xu.values().end(), X.data() + u * P * C * F);
        }
        const ag::Array* prev = sw.res[i].size() ? &sw.res[i] : nullptr;
        ag::Array prev_all;
        if (prev) {
            prev_all = ag::Array({(nb + 1) * P, prev->dim(1), prev->dim(2)});
            for (std::size_t u = 0; u <= nb; ++u) std::copy(prev->values().begin(), prev->values().end(), prev_all.data() + u * prev->size());
        }
        const auto& net = nets[k];
        ag::Array res_all;
        const ag::Array Fall = net.evaluate(X, prev ? &prev_all : nullptr, &res_all);
        const std::size_t res_len = res_all.size() / (nb + 1);
        sw.res[i] = ag::Array({P, res_all.dim(1), res_all.dim(2)},
                              std::vector<double>(res_all.data(), res_all.data() + res_len));
        auto Fv = [&](std::size_t u, std::size_t p, std::size_t c) { return Fall[(u * P + p) * C + c]; };
        for (std::size_t p = 0; p < P; ++p)
            for (std::size_t c = 0; c < C; ++c) out.mean_f[c] += Fv(0, p, c) / static_cast<double>(P);
        if (!train) return out;

        ag::Array target({P * C});
        std::vector<double> dS(d), da(d), bk(K), vrow(dK);
        for (std::size_t p = 0; p < P; ++p) {
            const std::size_t m = rows_[p];
            std::copy_n(&b_[(n * M + m) * K], K, bk.begin());
            for (std::size_t c = 0; c < C; ++c) {
                const double u0 = Ub[p * C + c] + Fv(0, p, c);
                auto quotient = [&](std::size_t u, double step) {
                    return (Ub[(u * P + p) * C + c] + Fv(u, p, c) - u0) / step;
                };
                for (std::size_t q = 0; q < d; ++q) {
                    dS[q] = quotient(q + 1, h[p].dS[q]);
                    da[q] = quotient(d + 2 + q, h[p].dalpha[q]);
                }
                const double db = quotient(d + 1, h[p].db);
                std::copy_n(&seq[(c * rows) * dK], dK, vrow.begin());
                const double f = bsde::bsde_drift(s_, k, &Sp[p * d], bk.data(), vrow.data(), bsde::LocalDerivs{dS.data(), db, da.data()});
                const double z = bsde::diffusion_term(d, s_.sigma.data(), dS.data(), noise_.at(n, m));
                target[p * C + c] = f * dt_ - z;
            }
        }
        ag::Array Xbase({P, C, F}, std::vector<double>(X.data(), X.data() + P * C * F));
        ag::Tape t;
        const auto fw = net.forward(t, Xbase, prev, true);
        const auto L = net::correction_loss(t, fw.F, target);
        out.loss = t.value(L).item();
        if (!std::isfinite(out.loss)) throw DivergenceError("non-finite training loss");
        t.backward(L);
        for (std::size_t j = 0; j < fw.bound.size(); ++j) sw.grad[j] += t.grad(fw.bound[j]);
        sw.loss += out.loss;
        sw.slice_loss.push_back(out.loss);
        return out;
    }

    /// Adam step on agent k's network with the gradients accumulated in `sw`.
    void step(std::size_t k, const AgentSweep& sw) {
        if (!cfg_.use_net) return;
        std::vector<ag::Array*> ps;
        for (auto& [_, a] : nets[k].params()) ps.push_back(&a);
        ag::adam_step(ps, sw.grad, adam[k], ag::AdamConfig{cfg_.lr});
    }

private:
    double rollout(std::size_t n, std::size_t m, std::vector<double>& S, std::vector<double>& b,
                   const std::vector<market::StepCoeffs>& co, const market::LiquidationCoeffs& liq, std::size_t k) const {
        return bsde::terminal_condition(rollout_wealth(n, m, S, b, co, liq, k), s_.gamma[k], psi[k]);
    }

    /// Relative terminal wealth X̂_k along one path.
    double rollout_wealth(std::size_t n, std::size_t m, std::vector<double>& S, std::vector<double>& b,
                          const std::vector<market::StepCoeffs>& co, const market::LiquidationCoeffs& liq,
                          std::size_t k) const {
        const std::size_t d = s_.d, K = s_.K;
        for (std::size_t r = 0; r < co.size(); ++r) market::advance(co[r], d, K, noise_.at(n + r, m), S.data(), b.data());
        market::liquidate(liq, d, K, S.data(), b.data());
        double xh;
        if (K == 1) {
            xh = b[0] * (1.0 - s_.phi);
        } else {
            double bar = 0.0;
            for (double x : b) bar += x;
            xh = b[k] - s_.phi * bar / static_cast<double>(K);
        }
        return xh;
    }

    const MarketSpec& s_;
    const SolverConfig& cfg_;
    std::uint64_t seed_;
    double dt_;
    market::NoiseTable noise_;
    std::vector<std::size_t> rows_;
    std::vector<double> x_ref_, u_scale_;
    std::vector<double> S_, b_;  // [(n*M + m)*d + i], [(n*M + m)*K + k]
};

}  // namespace tcx::solver
