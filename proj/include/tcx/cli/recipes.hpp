#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tcx/bsde/tree.hpp"
#include "tcx/cli/config.hpp"
#include "tcx/cli/report.hpp"
#include "tcx/eval/frontier.hpp"
#include "tcx/eval/montecarlo.hpp"
#include "tcx/eval/oracle.hpp"
#include "tcx/eval/sharpe.hpp"
#include "tcx/net/checkpoint.hpp"
#include "tcx/solver/solver.hpp"

namespace tcx::cli {

namespace fs = std::filesystem;
using Log = std::function<void(const std::string&)>;
using market::MarketSpec;

/// Everything a subcommand needs: the effective configuration, where to put
/// artifacts and the run hash stamped into every CSV row.
struct Run {
    RunConfig cfg;
    fs::path out;
    std::string subcommand;
    std::string hash;
    Log log = [](const std::string&) {};
    nlohmann::json manifest = nlohmann::json::object();
    std::vector<std::string> outputs;

    Run(RunConfig c, fs::path dir, std::string sub, Log l = {})
        : cfg(std::move(c)), out(std::move(dir)), subcommand(std::move(sub)), hash(run_hash(cfg.raw, subcommand)) {
        if (l) log = std::move(l);
        ensure_dir(out);
    }

    fs::path file(const std::string& name) {
        outputs.push_back(name);
        return out / name;
    }

    void write_manifest(double seconds) {
        nlohmann::json m = manifest;
        m["run_hash"] = hash;
        m["config_hash"] = fnv1a_hex(cfg.raw.dump());
        m["subcommand"] = subcommand;
        m["experiment"] = cfg.experiment;
        m["seed"] = cfg.seed;
        m["ensemble"] = cfg.solver.ensemble;
        m["eval_seed"] = cfg.eval_seed;
        m["eval_paths"] = cfg.eval_M;
        m["assumptions"] = cfg.assumptions;
        m["config"] = cfg.raw;
        m["wall_time_s"] = seconds;
        m["outputs"] = outputs;
        write_json(out / "manifest.json", m);
    }
};

// --------------------------------------------------------------- training

inline solver::TrainResult train_logged(const MarketSpec& s, const solver::SolverConfig& sc, const Log& log) {
    return solver::train(s, sc, [&](std::size_t e, std::size_t epoch, const std::vector<double>& losses) {
        if (epoch % 10 != 0) return;
        std::string line = "member " + std::to_string(e) + " epoch " + std::to_string(epoch) + " loss";
        for (double l : losses) line += " " + fmt(l);
        log(line);
    });
}

inline nlohmann::json loss_summary(const solver::TrainResult& tr) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& m : tr.members)
        j.push_back({{"seed", m.seed}, {"epochs", m.epochs}, {"converged", m.converged}, {"loss", m.loss}});
    return j;
}

inline void save_members(const fs::path& dir, const solver::TrainResult& tr) {
    ensure_dir(dir);
    for (std::size_t e = 0; e < tr.members.size(); ++e) {
        const auto& m = tr.members[e];
        if (m.nets.empty()) {
            write_json(dir / ("member" + std::to_string(e) + ".json"), solver::member_meta(m, 0));
            continue;
        }
        for (std::size_t k = 0; k < m.nets.size(); ++k)
            net::save_checkpoint_file((dir / ("member" + std::to_string(e) + "_agent" + std::to_string(k) + ".tcx")).string(),
                                      m.nets[k], solver::member_meta(m, k));
    }
}

inline std::vector<solver::MemberResult> load_members(const fs::path& dir, const solver::SolverConfig& sc, std::size_t K) {
    std::vector<solver::MemberResult> ms;
    for (std::size_t e = 0;; ++e) {
        const auto stem = dir / ("member" + std::to_string(e));
        if (sc.use_net) {
            if (!fs::exists(stem.string() + "_agent0.tcx")) break;
            std::vector<net::LoadedCheckpoint> cks;
            for (std::size_t k = 0; k < K; ++k) cks.push_back(net::load_checkpoint_file(stem.string() + "_agent" + std::to_string(k) + ".tcx"));
            ms.push_back(solver::member_from_checkpoints(std::move(cks)));
        } else {
            if (!fs::exists(stem.string() + ".json")) break;
            ms.push_back(solver::member_from_meta(read_json(stem.string() + ".json")));
        }
        const auto& p = ms.back().policy;
        if (p.N != sc.N || p.K != K) throw net::CheckpointError(stem.string() + ": trained for a different layout");
    }
    if (ms.empty()) throw IoError("no trained members in " + dir.string());
    return ms;
}

// ------------------------------------------------------------- evaluation

/// Fresh-path evaluation of an inferred schedule.
inline eval::McResult evaluate(const MarketSpec& s, const RunConfig& c, const solver::InferResult& inf) {
    return eval::mc_objective(s, inf.schedule.v, c.solver.N, c.eval_M, c.eval_seed);
}

inline void write_policy(Run& run, const MarketSpec& s, const solver::InferResult& inf, const eval::McResult& mc) {
    const auto& sc = run.cfg.solver;
    const std::size_t N = sc.N, dK = s.d * s.K;
    const double dt = s.T / static_cast<double>(N);
    {
        CsvWriter w(run.file("controls.csv"), run.hash, {"step", "t", "asset", "agent", "v", "alpha"});
        for (std::size_t n = 0; n <= N; ++n)
            for (std::size_t i = 0; i < s.d; ++i)
                for (std::size_t k = 0; k < s.K; ++k) {
                    const auto j = s.ik(i, k);
                    const double v = n < N ? inf.schedule.v[n * dK + j] : 0.0;
                    w.row({std::to_string(n), fmt(static_cast<double>(n) * dt), std::to_string(i), std::to_string(k),
                           fmt(v), fmt(inf.schedule.alpha[n * dK + j])});
                }
    }
    {
        CsvWriter w(run.file("value.csv"), run.hash,
                    {"agent", "value", "value_carried", "psi", "mc_mean", "mc_std", "mc_J", "mc_se_J"});
        for (std::size_t k = 0; k < s.K; ++k) {
            const auto& o = mc.agents[k];
            w.row({std::to_string(k), fmt(inf.value[k]), fmt(inf.value_carried[k]), fmt(inf.psi[k]), fmt(o.mean),
                   fmt(std::sqrt(o.var)), fmt(o.J), fmt(o.se_J)});
        }
    }
    std::vector<Series> alpha, rate;
    for (std::size_t i = 0; i < s.d; ++i)
        for (std::size_t k = 0; k < s.K; ++k) {
            Series a{"agent " + std::to_string(k) + " asset " + std::to_string(i), {}, {}};
            Series v = a;
            for (std::size_t n = 0; n <= N; ++n) {
                a.x.push_back(static_cast<double>(n) * dt);
                a.y.push_back(inf.schedule.alpha[n * dK + s.ik(i, k)]);
                if (n < N) {
                    v.x.push_back(static_cast<double>(n) * dt);
                    v.y.push_back(inf.schedule.v[n * dK + s.ik(i, k)]);
                }
            }
            alpha.push_back(std::move(a));
            rate.push_back(std::move(v));
        }
    write_svg(run.file("alpha.svg"), "optimal holdings", "t", "alpha*", alpha);
    write_svg(run.file("v.svg"), "optimal trade rate", "t", "v*", rate);
}

/// Train, infer and evaluate one market variant.
struct Solved {
    solver::TrainResult train;
    solver::InferResult infer;
    eval::McResult mc;
};

inline Solved solve(const MarketSpec& s, const RunConfig& c, const Log& log) {
    Solved r;
    r.train = train_logged(s, c.solver, log);
    r.infer = solver::infer(s, c.solver, r.train.members);
    r.mc = evaluate(s, c, r.infer);
    return r;
}

// ------------------------------------------------------------ subcommands

/// Monte Carlo of the buy-and-hold schedule (no trades).
inline eval::McResult run_simulate(Run& run) {
    const auto& c = run.cfg;
    const auto mc = eval::mc_objective(c.market, std::vector<double>(c.solver.N * c.market.d * c.market.K, 0.0),
                                       c.solver.N, c.eval_M, c.eval_seed);
    CsvWriter w(run.file("simulate.csv"), run.hash, {"agent", "mean_X", "std_X", "mean_Xhat", "var_Xhat", "J", "se_J"});
    for (std::size_t k = 0; k < c.market.K; ++k) {
        const auto raw = eval::summarize(mc.X[k], c.market.gamma[k]);
        const auto& o = mc.agents[k];
        w.row({std::to_string(k), fmt(raw.mean), fmt(std::sqrt(raw.var)), fmt(o.mean), fmt(o.var), fmt(o.J), fmt(o.se_J)});
    }
    return mc;
}

inline solver::TrainResult run_train(Run& run) {
    const auto& c = run.cfg;
    auto tr = train_logged(c.market, c.solver, run.log);
    save_members(run.out / "ckpt", tr);
    run.outputs.push_back("ckpt/");
    CsvWriter w(run.file("loss.csv"), run.hash, {"member", "epoch", "agent", "loss"});
    std::vector<Series> curves;
    for (std::size_t e = 0; e < tr.members.size(); ++e) {
        const auto& m = tr.members[e];
        for (std::size_t ep = 0; ep < m.loss.size(); ++ep)
            for (std::size_t k = 0; k < m.loss[ep].size(); ++k)
                w.row({std::to_string(e), std::to_string(ep), std::to_string(k), fmt(m.loss[ep][k])});
        Series sr{"member " + std::to_string(e), {}, {}};
        for (std::size_t ep = 0; ep < m.loss.size(); ++ep) {
            double tot = 0.0;
            for (double l : m.loss[ep]) tot += l;
            sr.x.push_back(static_cast<double>(ep));
            sr.y.push_back(tot > 0.0 ? std::log10(tot) : -20.0);
        }
        curves.push_back(std::move(sr));
    }
    write_svg(run.file("loss.svg"), "training loss", "epoch", "log10 loss", curves);
    run.manifest["training"] = loss_summary(tr);
    return tr;
}

inline solver::InferResult run_infer(Run& run, const fs::path& ckpt_dir) {
    const auto& c = run.cfg;
    const auto members = load_members(ckpt_dir, c.solver, c.market.K);
    const auto inf = solver::infer(c.market, c.solver, members);
    const auto mc = evaluate(c.market, c, inf);
    write_policy(run, c.market, inf, mc);
    run.manifest["members"] = members.size();
    return inf;
}

/// One comparison against a reference number.
struct Check {
    std::string quantity;
    double reference = 0.0, value = 0.0, rel_err_pct = 0.0, se = 0.0;
    bool pass = false;
};

struct ValidateResult {
    std::vector<Check> checks;
    std::vector<double> allocation;  // closed-form allocation at t = 0 when one was used
};

namespace detail {

inline eval::McResult closed_form_mc(const RunConfig& c, const std::string& kind, std::vector<double>& alloc0) {
    const auto& s = c.market;
    const std::size_t d = s.d, K = s.K;
    if (kind == "mv_portfolio") {
        if (K != 1) throw SchemaError("validate.kind mv_portfolio needs a single agent");
        Eigen::VectorXd A(static_cast<Eigen::Index>(d));
        Eigen::MatrixXd Sig(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) {
            A(static_cast<Eigen::Index>(i)) = s.mu[i] - s.r;
            for (std::size_t j = 0; j < d; ++j)
                Sig(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    s.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * s.sigma[i] * s.sigma[j];
        }
        const auto a0 = eval::mv_portfolio_alpha(A, Sig, s.gamma[0], s.r, s.T, 0.0, s.initial_wealth(0));
        alloc0.assign(a0.data(), a0.data() + a0.size());
        return eval::mc_feedback(
            s,
            [&](double t, const std::vector<double>& X, const std::vector<double>& S) {
                const auto a = eval::mv_portfolio_alpha(A, Sig, s.gamma[0], s.r, s.T, t, X[0]);
                std::vector<double> shares(d);
                for (std::size_t i = 0; i < d; ++i) shares[i] = a(static_cast<Eigen::Index>(i)) / S[i];
                return shares;
            },
            c.solver.N, c.eval_M, c.eval_seed);
    }
    if (d != 1) throw SchemaError("validate.kind relative_perf needs a single asset");
    std::vector<double> excess(K, s.mu[0] - s.r), sig(K, s.sigma[0]), phi(K, s.phi);
    alloc0 = eval::relative_perf_alpha(excess, s.gamma, sig, phi);
    const auto alloc = alloc0;
    return eval::mc_feedback(
        s,
        [alloc](double, const std::vector<double>&, const std::vector<double>& S) {
            std::vector<double> shares(alloc.size());
            for (std::size_t k = 0; k < alloc.size(); ++k) shares[k] = alloc[k] / S[0];
            return shares;
        },
        c.solver.N, c.eval_M, c.eval_seed);
}

}  // namespace detail

/// Compare the configured quantity with its reference value.
inline ValidateResult run_validate_values(Run& run) {
    const auto& c = run.cfg;
    const auto& v = c.validate;
    const std::string kind = v.at("kind");
    const double ref = v.at("reference");
    const double tol_pct = v.value("tolerance_pct", 0.5);
    ValidateResult res;
    auto add = [&](const std::string& q, double reference, double value, double se, bool pass) {
        res.checks.push_back({q, reference, value, eval::rel_error(reference, value), se, pass});
    };
    if (kind == "solver") {
        const auto sol = solve(c.market, c, run.log);
        write_policy(run, c.market, sol.infer, sol.mc);
        add("solver_value", ref, sol.infer.value[0], 0.0, eval::rel_error(ref, sol.infer.value[0]) <= tol_pct);
        add("solver_value_carried", ref, sol.infer.value_carried[0], 0.0,
            eval::rel_error(ref, sol.infer.value_carried[0]) <= tol_pct);
        add("solver_mc", ref, sol.mc.agents[0].J, sol.mc.agents[0].se_J,
            eval::rel_error(ref, sol.mc.agents[0].J) <= tol_pct);
        run.manifest["training"] = loss_summary(sol.train);
    } else {
        const auto mc = detail::closed_form_mc(c, kind, res.allocation);
        const auto& o = mc.agents[0];
        const double tol_se = v.value("tolerance_se", 1.0);
        add(kind + "_mc", ref, o.J, o.se_J, std::abs(o.J - ref) <= tol_se * o.se_J);
        if (v.value("check_solver", false)) {
            const auto sol = solve(c.market, c, run.log);
            write_policy(run, c.market, sol.infer, sol.mc);
            add("solver_value_vs_" + kind, o.J, sol.infer.value[0], 0.0, eval::rel_error(o.J, sol.infer.value[0]) <= tol_pct);
            add("solver_mc_vs_" + kind, o.J, sol.mc.agents[0].J, sol.mc.agents[0].se_J,
                eval::rel_error(o.J, sol.mc.agents[0].J) <= tol_pct);
            run.manifest["training"] = loss_summary(sol.train);
        }
    }
    CsvWriter w(run.file("values.csv"), run.hash,
                {"experiment", "quantity", "T", "analytical", "approx", "rel_err_pct", "se", "pass"});
    for (const auto& ch : res.checks)
        w.row({c.experiment, ch.quantity, fmt(c.market.T), fmt(ch.reference), fmt(ch.value), fmt(ch.rel_err_pct),
               fmt(ch.se), ch.pass ? "1" : "0"});
    return res;
}

struct SensitivityResult {
    std::string parameter;
    std::vector<double> values;
    std::vector<std::size_t> probes;               // time steps compared
    std::vector<std::vector<double>> alpha;        // [value][probe], mean over agents and assets
    std::vector<double> slope;                     // [probe] least-squares slope of α* in the parameter
    int expected_sign = 0;
    std::size_t agreeing = 0;                      // probes whose slope has the expected sign
};

inline std::vector<std::size_t> probe_steps(std::size_t N) {
    std::vector<std::size_t> p;
    for (std::size_t j = 0; j < 5; ++j) p.push_back(std::max<std::size_t>(1, (j * N + 2) / 4));
    return p;
}

inline SensitivityResult sweep(Run& run, const std::string& parameter, const std::vector<double>& values) {
    const auto& c = run.cfg;
    SensitivityResult r{parameter, values, probe_steps(c.solver.N), {}, {}, parameter == "gamma" ? -1 : 1, 0};
    for (double x : values) {
        MarketSpec s = c.market;
        if (parameter == "gamma") {
            std::fill(s.gamma.begin(), s.gamma.end(), x);
        } else {
            s.phi = x;
        }
        run.log(parameter + " = " + fmt(x));
        const auto tr = train_logged(s, c.solver, run.log);
        const auto inf = solver::infer(s, c.solver, tr.members);
        std::vector<double> a;
        const std::size_t dK = s.d * s.K;
        for (auto n : r.probes) {
            double m = 0.0;
            for (std::size_t j = 0; j < dK; ++j) m += inf.schedule.alpha[n * dK + j];
            a.push_back(m / static_cast<double>(dK));
        }
        r.alpha.push_back(a);
    }
    double xm = 0.0;
    for (double x : values) xm += x;
    xm /= static_cast<double>(values.size());
    for (std::size_t p = 0; p < r.probes.size(); ++p) {
        double ym = 0.0, sxy = 0.0, sxx = 0.0;
        for (const auto& a : r.alpha) ym += a[p];
        ym /= static_cast<double>(values.size());
        for (std::size_t j = 0; j < values.size(); ++j) {
            sxy += (values[j] - xm) * (r.alpha[j][p] - ym);
            sxx += (values[j] - xm) * (values[j] - xm);
        }
        r.slope.push_back(sxy / sxx);
        if (r.slope.back() * r.expected_sign > 0.0) ++r.agreeing;
    }
    return r;
}

inline std::vector<SensitivityResult> run_sensitivity(Run& run) {
    const auto& sv = run.cfg.sensitivity;
    std::vector<SensitivityResult> out;
    if (sv.contains("gammas")) out.push_back(sweep(run, "gamma", sv["gammas"].get<std::vector<double>>()));
    if (sv.contains("phis")) out.push_back(sweep(run, "phi", sv["phis"].get<std::vector<double>>()));
    const double dt = run.cfg.market.T / static_cast<double>(run.cfg.solver.N);
    CsvWriter w(run.file("sensitivity.csv"), run.hash, {"parameter", "value", "step", "t", "alpha"});
    CsvWriter ws(run.file("sensitivity_slopes.csv"), run.hash, {"parameter", "step", "t", "slope", "expected_sign", "agrees"});
    for (const auto& r : out) {
        std::vector<Series> curves;
        for (std::size_t j = 0; j < r.values.size(); ++j) {
            Series sr{r.parameter + " = " + fmt(r.values[j]), {}, {}};
            for (std::size_t p = 0; p < r.probes.size(); ++p) {
                const double t = static_cast<double>(r.probes[p]) * dt;
                w.row({r.parameter, fmt(r.values[j]), std::to_string(r.probes[p]), fmt(t), fmt(r.alpha[j][p])});
                sr.x.push_back(t);
                sr.y.push_back(r.alpha[j][p]);
            }
            curves.push_back(std::move(sr));
        }
        for (std::size_t p = 0; p < r.probes.size(); ++p)
            ws.row({r.parameter, std::to_string(r.probes[p]), fmt(static_cast<double>(r.probes[p]) * dt), fmt(r.slope[p]),
                    std::to_string(r.expected_sign), r.slope[p] * r.expected_sign > 0.0 ? "1" : "0"});
        write_svg(run.file("sensitivity_" + r.parameter + ".svg"), "alpha* across " + r.parameter, "t", "alpha*", curves);
    }
    return out;
}

inline eval::Frontier run_frontier(Run& run) {
    const auto& c = run.cfg;
    const auto gammas = c.frontier.at("gammas").get<std::vector<double>>();
    auto f = eval::efficient_frontier(gammas, [&](double g) {
        MarketSpec s = c.market;
        std::fill(s.gamma.begin(), s.gamma.end(), g);
        run.log("gamma = " + fmt(g));
        const auto sol = solve(s, c, run.log);
        const auto raw = eval::summarize(sol.mc.X[0], g);
        return eval::FrontierPoint{raw.mean, std::sqrt(raw.var), g};
    });
    {
        CsvWriter w(run.file("frontier.csv"), run.hash, {"gamma", "gain", "std"});
        for (const auto& p : f.points) w.row({fmt(p.gamma), fmt(p.gain), fmt(p.std)});
    }
    {
        CsvWriter w(run.file("frontier_fit.csv"), run.hash, {"power", "coefficient", "degenerate"});
        for (std::size_t j = 0; j < f.fit.coef.size(); ++j)
            w.row({std::to_string(j), fmt(f.fit.coef[j]), f.fit.degenerate ? "1" : "0"});
    }
    Series pts{"computed", {}, {}, true}, fit{"degree-4 fit", {}, {}};
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& p : f.points) {
        pts.x.push_back(p.std);
        pts.y.push_back(p.gain);
        lo = std::min(lo, p.std), hi = std::max(hi, p.std);
    }
    for (int j = 0; j <= 50 && hi > lo; ++j) {
        const double x = lo + (hi - lo) * j / 50.0;
        fit.x.push_back(x);
        fit.y.push_back(f.fit(x));
    }
    write_svg(run.file("frontier.svg"), "efficient frontier", "std of terminal wealth", "expected gain", {pts, fit});
    return f;
}

inline eval::SharpeReport run_sharpe(Run& run) {
    const auto& c = run.cfg;
    const auto& s = c.market;
    const auto sol = solve(s, c, run.log);
    write_policy(run, s, sol.infer, sol.mc);
    std::vector<double> X0(s.K), net(s.K, 0.0);
    for (std::size_t k = 0; k < s.K; ++k) {
        X0[k] = s.initial_wealth(k);
        for (std::size_t i = 0; i < s.d; ++i) net[k] += s.alpha0[s.ik(i, k)];
    }
    const auto rep = eval::sharpe(sol.mc.X, sol.mc.hold, X0, net);
    CsvWriter w(run.file("sharpe.csv"), run.hash, {"agent", "cohort", "SR"});
    for (std::size_t k = 0; k < s.K; ++k)
        w.row({std::to_string(k), rep.cohort[k], rep.sr[k] ? fmt(*rep.sr[k]) : "undefined"});
    w.row({"mean", "seller", rep.seller_mean ? fmt(*rep.seller_mean) : "undefined"});
    w.row({"mean", "buyer", rep.buyer_mean ? fmt(*rep.buyer_mean) : "undefined"});
    run.manifest["training"] = loss_summary(sol.train);
    return rep;
}

struct OracleReport {
    double psi = 0.0;
    bsde::TreeResult tree;
    eval::OracleResult oracle;
    solver::MemberResult solver;
    double solver_oracle_value = 0.0;  // exhaustive optimum at the solver's final ψ
    bool tree_agrees = false;
};

/// Backward recursion and the trained solver against exhaustive enumeration.
inline OracleReport run_oracle(Run& run) {
    const auto& c = run.cfg;
    const auto& s = c.market;
    OracleReport r;
    r.psi = c.oracle.is_object() && c.oracle.contains("psi") ? c.oracle["psi"].get<double>() : bsde::initial_psi(s, 0);
    const auto& g = c.solver.grids[0];
    r.oracle = eval::dp_oracle(s, g, c.solver.N, r.psi);
    r.tree = bsde::tree_backward(s, g, c.solver.N, 1, c.seed, r.psi);
    r.tree_agrees = std::abs(r.tree.value - r.oracle.value) <= 1e-8 && r.tree.controls == r.oracle.controls;
    r.solver = solver::train_member(s, c.solver, c.seed);
    const double pen = 0.5 * s.gamma[0] * r.solver.psi[0] * r.solver.psi[0];
    r.solver_oracle_value = eval::dp_oracle(s, g, c.solver.N, r.solver.psi[0]).value - pen;
    const auto sched = solver::make_schedule(s, c.solver.grids, r.solver.policy);
    auto seq = [](const std::vector<std::size_t>& v) {
        std::string t;
        for (auto x : v) t += (t.empty() ? "" : " ") + std::to_string(x);
        return t;
    };
    CsvWriter w(run.file("oracle.csv"), run.hash, {"method", "psi", "value", "controls", "oracle_value", "abs_diff"});
    w.row({"exhaustive", fmt(r.psi), fmt(r.oracle.value), seq(r.oracle.controls), fmt(r.oracle.value), "0"});
    w.row({"backward_recursion", fmt(r.psi), fmt(r.tree.value), seq(r.tree.controls), fmt(r.oracle.value),
           fmt(std::abs(r.tree.value - r.oracle.value))});
    w.row({"solver_carried", fmt(r.solver.psi[0]), fmt(r.solver.value_carried[0]), seq(sched.idx),
           fmt(r.solver_oracle_value), fmt(std::abs(r.solver.value_carried[0] - r.solver_oracle_value))});
    w.row({"solver_approx", fmt(r.solver.psi[0]), fmt(r.solver.value[0]), seq(sched.idx), fmt(r.solver_oracle_value),
           fmt(std::abs(r.solver.value[0] - r.solver_oracle_value))});
    return r;
}

}  // namespace tcx::cli
