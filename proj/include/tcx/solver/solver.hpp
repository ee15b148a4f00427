#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "json.hpp"

#include "tcx/bsde/bsde.hpp"
#include "tcx/net/checkpoint.hpp"
#include "tcx/solver/engine.hpp"

namespace tcx::solver {

/// Trained state of one ensemble member.
struct MemberResult {
    std::uint64_t seed = 0;
    Policy policy;
    std::vector<double> psi;                 // [K]
    std::vector<net::ValueNet> nets;         // [K], empty without the network
    std::vector<std::vector<double>> loss;   // [epoch][K] summed slice losses
    std::vector<std::vector<double>> slice_loss;  // [K] slice losses of the last epoch
    std::vector<double> value;               // [K] mean Û^0 - (γ/2)ψ² of the last sweep
    std::vector<double> value_carried;       // [K] same with F dropped
    std::size_t epochs = 0;
    bool converged = false;
};

struct TrainResult {
    std::vector<MemberResult> members;
};

/// Elementwise mean over ensemble members.
inline std::vector<double> ensemble_aggregate(const std::vector<std::vector<double>>& values) {
    if (values.empty()) throw market::SpecError("ensemble_aggregate: need at least one member");
    std::vector<double> out(values[0].size(), 0.0);
    for (const auto& v : values) {
        if (v.size() != out.size()) throw market::SpecError("ensemble_aggregate: member sizes differ");
        for (std::size_t j = 0; j < v.size(); ++j) out[j] += v[j];
    }
    for (auto& x : out) x /= static_cast<double>(values.size());
    return out;
}

namespace detail {

inline std::vector<double> statistic(const SliceOut& o, Decision d, double gamma) {
    std::vector<double> s = o.mean_y;
    if (d == Decision::Dual)
        for (std::size_t c = 0; c < s.size(); ++c) s[c] = o.mean_x[c] - 0.5 * gamma * o.var_x[c];
    if (d == Decision::Approx)
        for (std::size_t c = 0; c < s.size(); ++c) s[c] += o.mean_f[c];
    return s;
}

inline void record_decision(const MarketSpec& s, const SolverConfig& cfg, const Schedule& base, Policy& own,
                            std::size_t n, std::size_t i, std::size_t k, std::size_t c) {
    const double dt = s.T / static_cast<double>(cfg.N);
    own.at(n + 1, i, k) = base.alpha_at(n)[s.ik(i, k)] + cfg.grids[k][c] * dt;
}

}  // namespace detail

/// Called after every epoch with (member, epoch, loss per agent).
using EpochCallback = std::function<void(std::size_t, std::size_t, const std::vector<double>&)>;

/// Backward-in-time training of one member: each epoch simulates the current
/// policy, refreshes ψ, then sweeps n = N-1..0 per agent against the other
/// agents' previous-epoch controls, and takes one Adam step per agent on the
/// summed slice losses.
inline MemberResult train_member(const MarketSpec& s, const SolverConfig& cfg, std::uint64_t seed,
                                 const EpochCallback& on_epoch = {}, std::size_t member_index = 0) {
    cfg.validate(s);
    Member mb(s, cfg, seed);
    Policy policy = Policy::hold(s, cfg.N);
    MemberResult res;
    res.seed = seed;
    std::optional<std::vector<net::ValueNet>> best;
    double best_loss = INFINITY;
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto mean_xhat = mb.forward(policy);
        // The first sweep keeps the mark-to-market ψ. Taking it from the hold
        // policy instead can pin the iteration at holding whenever terminal
        // liquidation is ruinous: X̂ ≈ 0 makes every sale look like pure variance.
        double psi_move = epoch == 0 ? INFINITY : 0.0;
        if (epoch > 0)
            for (std::size_t k = 0; k < s.K; ++k) {
                psi_move = std::max(psi_move, std::abs(-mean_xhat[k] - mb.psi[k]));
                mb.psi[k] = -mean_xhat[k];
            }
        Policy next = policy;
        std::vector<double> losses(s.K, 0.0);
        res.value.assign(s.K, 0.0);
        res.value_carried.assign(s.K, 0.0);
        res.slice_loss.assign(s.K, {});
        std::vector<AgentSweep> sweeps;
        for (std::size_t k = 0; k < s.K; ++k) {
            Policy own = policy;
            auto sw = mb.start_sweep(k);
            for (std::size_t n = cfg.N; n-- > 0;)
                for (std::size_t i = 0; i < s.d; ++i) {
                    const auto out = mb.slice(sw, own, n, i, cfg.use_net);
                    const auto stat = detail::statistic(out, cfg.decision, s.gamma[k]);
                    const auto c = bsde::argmax_tiebreak(stat.data(), stat.size());
                    detail::record_decision(s, cfg, mb.base, own, n, i, k, c);
                    if (n == 0 && i + 1 == s.d) {
                        const double pen = 0.5 * s.gamma[k] * mb.psi[k] * mb.psi[k];
                        res.value_carried[k] = out.mean_y[c] - pen;
                        res.value[k] = out.mean_y[c] + out.mean_f[c] - pen;
                    }
                }
            for (std::size_t n = 1; n <= cfg.N; ++n)
                for (std::size_t i = 0; i < s.d; ++i) next.at(n, i, k) = own.at(n, i, k);
            losses[k] = sw.loss;
            res.slice_loss[k] = sw.slice_loss;
            sweeps.push_back(std::move(sw));
        }
        res.loss.push_back(losses);
        res.epochs = epoch + 1;
        double total = 0.0;
        for (double l : losses) total += l;
        if (cfg.use_net && total < best_loss) {
            best_loss = total;
            best = mb.nets;
        }
        if (on_epoch) on_epoch(member_index, epoch, losses);
        const bool stable = next == policy && psi_move < cfg.psi_tol;
        const bool small_loss = cfg.use_net && total < cfg.loss_threshold;
        for (std::size_t k = 0; k < s.K; ++k) mb.step(k, sweeps[k]);
        policy = std::move(next);
        if (stable || small_loss) {
            res.converged = true;
            break;
        }
    }
    res.policy = policy;
    res.psi = mb.psi;
    res.nets = (!res.converged && best) ? *best : mb.nets;
    return res;
}

/// Trains E members with seeds seed, seed+1, ...
inline TrainResult train(const MarketSpec& s, const SolverConfig& cfg, const EpochCallback& on_epoch = {}) {
    cfg.validate(s);
    TrainResult r;
    for (std::size_t e = 0; e < cfg.ensemble; ++e) r.members.push_back(train_member(s, cfg, cfg.seed + e, on_epoch, e));
    return r;
}

/// Ensemble policy and its value.
struct InferResult {
    Policy policy;
    Schedule schedule;                             // v*[n][i*K+k], α*[n][i*K+k]
    std::vector<double> psi;                       // [K] member mean
    std::vector<double> value;                     // [K] bagged mean Û^0 - (γ/2)ψ²
    std::vector<double> value_carried;             // [K]
    std::vector<std::vector<double>> value_path;   // [K][n] bagged statistic at the selected column
};

/// Bagged backward sweeps starting from the member-averaged policy: at every
/// slice each member evaluates the columns on its own batch, the statistics
/// are averaged and the argmax is applied to the shared policy.
inline InferResult infer(const MarketSpec& s, const SolverConfig& cfg, const std::vector<MemberResult>& members) {
    cfg.validate(s);
    if (members.empty()) throw market::SpecError("infer: need at least one member");
    const std::size_t E = members.size();
    std::vector<Member> mbs;
    mbs.reserve(E);
    for (const auto& m : members) {
        mbs.emplace_back(s, cfg, m.seed);
        if (cfg.use_net) {
            if (m.nets.size() != s.K) throw market::SpecError("infer: member lacks per-agent networks");
            mbs.back().nets = m.nets;
        }
    }
    Policy policy = members[0].policy;
    for (std::size_t j = 0; j < policy.target.size(); ++j) {
        double a = 0.0;
        for (const auto& m : members) a += m.policy.target[j];
        policy.target[j] = a / static_cast<double>(E);
    }
    InferResult r;
    r.value.assign(s.K, 0.0);
    r.value_carried.assign(s.K, 0.0);
    r.value_path.assign(s.K, std::vector<double>(cfg.N, 0.0));
    r.psi.assign(s.K, 0.0);
    for (std::size_t sweep = 0; sweep < std::max<std::size_t>(cfg.infer_sweeps, 1); ++sweep) {
        std::fill(r.psi.begin(), r.psi.end(), 0.0);
        for (auto& mb : mbs) {
            const auto mx = mb.forward(policy);
            for (std::size_t k = 0; k < s.K; ++k) {
                mb.psi[k] = -mx[k];
                r.psi[k] += mb.psi[k] / static_cast<double>(E);
            }
        }
        Policy next = policy;
        for (std::size_t k = 0; k < s.K; ++k) {
            Policy own = policy;
            std::vector<AgentSweep> sws;
            for (auto& mb : mbs) sws.push_back(mb.start_sweep(k));
            for (std::size_t n = cfg.N; n-- > 0;)
                for (std::size_t i = 0; i < s.d; ++i) {
                    std::vector<std::vector<double>> stats, ys, fs;
                    for (std::size_t e = 0; e < E; ++e) {
                        const auto out = mbs[e].slice(sws[e], own, n, i, false);
                        stats.push_back(detail::statistic(out, cfg.decision, s.gamma[k]));
                        ys.push_back(out.mean_y);
                        fs.push_back(out.mean_f);
                    }
                    const auto stat = ensemble_aggregate(stats);
                    const auto c = bsde::argmax_tiebreak(stat.data(), stat.size());
                    detail::record_decision(s, cfg, mbs[0].base, own, n, i, k, c);
                    if (i + 1 == s.d) {
                        const auto y = ensemble_aggregate(ys), f = ensemble_aggregate(fs);
                        r.value_path[k][n] = stat[c];
                        if (n == 0) {
                            double pen = 0.0;
                            for (const auto& mb : mbs) pen += 0.5 * s.gamma[k] * mb.psi[k] * mb.psi[k] / static_cast<double>(E);
                            r.value_carried[k] = y[c] - pen;
                            r.value[k] = y[c] + f[c] - pen;
                        }
                    }
                }
            for (std::size_t n = 1; n <= cfg.N; ++n)
                for (std::size_t i = 0; i < s.d; ++i) next.at(n, i, k) = own.at(n, i, k);
        }
        policy = std::move(next);
    }
    r.policy = policy;
    r.schedule = make_schedule(s, cfg.grids, policy);
    return r;
}

// ----------------------------------------------------------------- persistence

/// Member metadata stored alongside each agent's network.
inline nlohmann::json member_meta(const MemberResult& m, std::size_t k) {
    nlohmann::json losses = nlohmann::json::array();
    for (const auto& l : m.loss) losses.push_back(l[k]);
    return {{"seed", m.seed},           {"agent", k},           {"epochs", m.epochs},
            {"converged", m.converged}, {"psi", m.psi},         {"targets", m.policy.target},
            {"N", m.policy.N},          {"d", m.policy.d},      {"K", m.policy.K},
            {"loss", losses},           {"final_loss", m.loss.empty() ? 0.0 : m.loss.back()[k]}};
}

/// Rebuild a member's policy and bookkeeping from its metadata (no networks).
inline MemberResult member_from_meta(const nlohmann::json& meta) {
    MemberResult m;
    m.seed = meta.at("seed");
    m.epochs = meta.at("epochs");
    m.converged = meta.at("converged");
    m.psi = meta.at("psi").get<std::vector<double>>();
    m.policy.N = meta.at("N");
    m.policy.d = meta.at("d");
    m.policy.K = meta.at("K");
    m.policy.target = meta.at("targets").get<std::vector<double>>();
    if (m.policy.target.size() != (m.policy.N + 1) * m.policy.d * m.policy.K || m.psi.size() != m.policy.K)
        throw net::CheckpointError("member metadata does not match its policy layout");
    return m;
}

/// Rebuild a member from the K checkpoints written for it.
inline MemberResult member_from_checkpoints(std::vector<net::LoadedCheckpoint> cks) {
    if (cks.empty()) throw net::CheckpointError("checkpoint set is empty");
    MemberResult m = member_from_meta(cks[0].meta);
    if (cks.size() != m.policy.K) throw net::CheckpointError("checkpoint set does not match its policy layout");
    for (auto& c : cks) m.nets.push_back(std::move(c.net));
    return m;
}

}  // namespace tcx::solver
