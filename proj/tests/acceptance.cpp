// Acceptance run: one PASS/FAIL line per criterion, then a JSON summary in
// <build>/acceptance_out/summary.json. Criteria can be selected by name:
//   acceptance AC2 AC6
// Exit status is 0 only when every selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "tcx/autograd/gradcheck.hpp"
#include "tcx/bsde/tree.hpp"
#include "tcx/cli/recipes.hpp"
#include "tcx/eval/oracle.hpp"

using namespace tcx;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kSource = TCX_SOURCE_DIR;
const fs::path kOut = fs::current_path() / "acceptance_out";

struct Outcome {
    bool pass = false;
    std::string detail;
    json data = json::object();
};

cli::RunConfig config(const std::string& name) {
    return cli::load_config(kSource + "/configs/" + name + ".json", kSource + "/schema/run_config.schema.json");
}

cli::Run run_for(const std::string& name, const std::string& sub) {
    return cli::Run(config(name), kOut / name, sub, [](const std::string& line) { std::fprintf(stderr, "  %s\n", line.c_str()); });
}

std::string num(double x, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ------------------------------------------------------------------ criteria

Outcome gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string worst_name;
    std::size_t entries = 0;
    for (const auto& c : ag::primitive_cases()) {
        const auto r = ag::gradient_check(c.build, c.params);
        entries += r.entries;
        if (r.max_rel_err >= worst) worst = r.max_rel_err, worst_name = c.name;
    }
    for (unsigned seed : {1u, 2u, 3u}) {
        auto cases = ag::primitive_cases(seed);
        const auto r = ag::gradient_check(cases.back().build, cases.back().params);
        entries += r.entries;
        if (r.max_rel_err >= worst) worst = r.max_rel_err, worst_name = "composite seed " + std::to_string(seed);
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-4 && secs < 10.0,
            "max rel err " + num(worst, 3) + " (" + worst_name + "), " + std::to_string(entries) + " entries, " + num(secs, 3) + " s",
            {{"max_rel_err", worst}, {"entries", entries}, {"seconds", secs}}};
}

Outcome dp_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    auto s = config("oracle_tiny").market;
    const auto grid = market::ControlGrid::uniform(-2.0, 1.0, 3, s.T);
    bool ok = s.kappa_tau[0] > 0.0 && s.sigma[0] == 0.0;
    double worst = 0.0;
    json rows = json::array();
    for (std::size_t N = 1; N <= 3; ++N)
        for (double psi : {-1.0, bsde::initial_psi(s, 0), 0.5}) {
            const auto ex = eval::dp_oracle(s, grid, N, psi);
            const auto tr = bsde::tree_backward(s, grid, N, 1, 1, psi);
            const double diff = std::abs(ex.value - tr.value);
            worst = std::max(worst, diff);
            ok = ok && diff <= 1e-8 && ex.controls == tr.controls;
            rows.push_back({{"N", N}, {"psi", psi}, {"oracle", ex.value}, {"recursion", tr.value}, {"same_controls", ex.controls == tr.controls}});
        }
    const double secs = seconds_since(t0);
    return {ok && secs < 1.0, "max |diff| " + num(worst, 3) + " over N=1..3, 3 psi each, " + num(secs, 3) + " s",
            {{"cases", rows}, {"seconds", secs}}};
}

Outcome single_asset_value() {
    const auto t0 = std::chrono::steady_clock::now();
    auto run = run_for("single_asset_value", "infer");
    const auto sol = cli::solve(run.cfg.market, run.cfg, run.log);
    const double ref = run.cfg.validate.at("reference"), tol = run.cfg.validate.at("tolerance_pct");
    const double err = eval::rel_error(ref, sol.infer.value[0]);
    const double secs = seconds_since(t0);
    return {err <= tol && secs <= 1800.0,
            "value " + num(sol.infer.value[0], 8) + " vs " + num(ref, 8) + ", rel err " + num(err, 3) + "% (budget " + num(tol) +
                "%), carried " + num(sol.infer.value_carried[0], 8) + ", MC J " + num(sol.mc.agents[0].J, 8) + ", " + num(secs, 4) + " s",
            {{"value", sol.infer.value[0]}, {"value_carried", sol.infer.value_carried[0]}, {"mc_J", sol.mc.agents[0].J},
             {"rel_err_pct", err}, {"seconds", secs}}};
}

Outcome validate(const std::string& name) {
    auto run = run_for(name, "validate");
    const auto res = cli::run_validate_values(run);
    bool ok = !res.checks.empty();
    std::string detail;
    json rows = json::array();
    for (const auto& c : res.checks) {
        ok = ok && c.pass;
        detail += (detail.empty() ? "" : "; ") + c.quantity + " " + num(c.value, 8) + " vs " + num(c.reference, 8) + " (" +
                  num(c.rel_err_pct, 3) + "%, se " + num(c.se, 3) + ") " + (c.pass ? "ok" : "out");
        rows.push_back({{"quantity", c.quantity}, {"value", c.value}, {"reference", c.reference}, {"rel_err_pct", c.rel_err_pct},
                        {"se", c.se}, {"pass", c.pass}});
    }
    return {ok, detail, {{"checks", rows}}};
}

Outcome frontier() {
    auto run = run_for("frontier", "frontier");
    const auto f = cli::run_frontier(run);
    bool inside = false;
    std::string detail;
    json rows = json::array();
    for (const auto& p : f.points) {
        const bool in = p.gain >= 98.8 && p.gain <= 99.6 && p.std >= 0.55 && p.std <= 0.95;
        inside = inside || in;
        detail += (detail.empty() ? "" : " ") + std::string("(") + num(p.gamma, 3) + ": " + num(p.gain, 6) + ", " + num(p.std, 3) +
                  (in ? ")*" : ")");
        rows.push_back({{"gamma", p.gamma}, {"gain", p.gain}, {"std", p.std}, {"in_box", in}});
    }
    bool monotone = true;
    for (std::size_t j = 1; j < f.points.size(); ++j)
        monotone = monotone && f.points[j].gain <= f.points[j - 1].gain && f.points[j].std <= f.points[j - 1].std;
    return {inside, "gamma: (gain, std) " + detail + (monotone ? "; risk and gain fall together" : "; not monotone"),
            {{"points", rows}, {"monotone", monotone}, {"fit_degenerate", f.fit.degenerate}}};
}

Outcome sensitivity() {
    auto run = run_for("sensitivity", "validate");
    const auto sweeps = cli::run_sensitivity(run);
    bool ok = sweeps.size() == 2;
    std::string detail;
    json rows = json::array();
    for (const auto& s : sweeps) {
        ok = ok && s.agreeing >= 4 && s.probes.size() == 5;
        std::string slopes;
        for (double v : s.slope) slopes += (slopes.empty() ? "" : " ") + num(v, 3);
        detail += (detail.empty() ? "" : "; ") + s.parameter + " " + std::to_string(s.agreeing) + "/" + std::to_string(s.probes.size()) +
                  " slopes [" + slopes + "]";
        rows.push_back({{"parameter", s.parameter}, {"agreeing", s.agreeing}, {"slopes", s.slope}});
    }
    return {ok, detail, {{"sweeps", rows}}};
}

Outcome sellers_buyers() {
    auto run = run_for("sellers_buyers", "sharpe");
    const auto rep = cli::run_sharpe(run);
    const bool defined = rep.seller_mean && rep.buyer_mean;
    const double s = defined ? *rep.seller_mean : NAN, b = defined ? *rep.buyer_mean : NAN;
    return {defined && s > b && b > 0.0, "seller mean SR " + num(s, 4) + ", buyer mean SR " + num(b, 4),
            {{"seller_mean", s}, {"buyer_mean", b}}};
}

Outcome determinism() {
    // byte-identical CSVs from two simulate runs and two training runs
    auto read = [](const fs::path& p) { return cli::read_text(p.string()); };
    auto sim = [&](const std::string& tag) {
        cli::Run r(config("impact_agent"), kOut / ("determinism_sim_" + tag), "simulate");
        cli::run_simulate(r);
        return read(r.out / "simulate.csv");
    };
    const bool sim_same = sim("a") == sim("b");

    auto small = config("two_agent_closed_form");
    small.solver.N = 5;
    small.solver.M = 64;
    small.solver.net_paths = 16;
    small.solver.max_epochs = 3;
    small.eval_M = 500;
    auto train = [&](const std::string& tag) {
        cli::Run r(small, kOut / ("determinism_train_" + tag), "train");
        const auto tr = cli::run_train(r);
        return std::make_pair(read(r.out / "loss.csv"), tr);
    };
    const auto [loss_a, tr_a] = train("a");
    const auto [loss_b, tr_b] = train("b");
    const bool train_same = loss_a == loss_b;

    // inference from reloaded checkpoints equals inference from memory, bit for bit
    const auto mem = solver::infer(small.market, small.solver, tr_a.members);
    cli::Run i1(small, kOut / "determinism_infer_a", "infer"), i2(small, kOut / "determinism_infer_b", "infer");
    const auto disk = cli::run_infer(i1, kOut / "determinism_train_a" / "ckpt");
    cli::run_infer(i2, kOut / "determinism_train_b" / "ckpt");
    const bool infer_same = disk.value == mem.value && disk.value_carried == mem.value_carried && disk.schedule.v == mem.schedule.v;
    const bool csv_same = read(i1.out / "controls.csv") == read(i2.out / "controls.csv") &&
                          read(i1.out / "value.csv") == read(i2.out / "value.csv");
    auto yn = [](bool b) { return b ? "identical" : "DIFFERENT"; };
    return {sim_same && train_same && infer_same && csv_same,
            std::string("simulate.csv ") + yn(sim_same) + ", loss.csv " + yn(train_same) + ", reloaded inference " + yn(infer_same) +
                ", controls/value csv " + yn(csv_same),
            {{"simulate", sim_same}, {"train", train_same}, {"infer_reload", infer_same}, {"infer_csv", csv_same}}};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"AC1", gradients},
        {"AC2", dp_oracle},
        {"AC3", single_asset_value},
        {"AC4", [] { return validate("two_agent_closed_form"); }},
        {"AC5", [] { return validate("two_asset_closed_form"); }},
        {"AC6", frontier},
        {"AC7", sensitivity},
        {"AC8", sellers_buyers},
        {"AC9", determinism},
    };
    std::set<std::string> only(argv + 1, argv + argc);
    cli::ensure_dir(kOut);
    json summary = json::object();
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        if (!only.empty() && !only.count(name)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what(), {}};
        }
        const double secs = seconds_since(t0);
        std::printf("%s %s  %s  [%.1f s]\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        std::fflush(stdout);
        o.data["pass"] = o.pass;
        o.data["detail"] = o.detail;
        o.data["wall_time_s"] = secs;
        summary[name] = o.data;
        failed += o.pass ? 0 : 1;
    }
    cli::write_json(kOut / "summary.json", summary);
    return failed == 0 ? 0 : 1;
}
