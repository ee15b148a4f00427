// tcx: command-line driver for training, inference and evaluation runs.
//
// Exit status: 0 success, 1 unexpected failure, 2 invalid configuration,
// 3 numerical divergence, 4 file I/O. Failures print one JSON object on stderr
// and, when the output directory is writable, also leave it in error.json.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "tcx/cli/recipes.hpp"

#ifndef TCX_SOURCE_DIR
#define TCX_SOURCE_DIR "."
#endif

namespace {

using namespace tcx;
namespace fs = std::filesystem;

struct Options {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> ensemble;
    std::string schema = std::string(TCX_SOURCE_DIR) + "/schema/run_config.schema.json";
    std::string checkpoints;
    bool quiet = false;
};

cli::RunConfig load(const Options& o) {
    auto doc = cli::read_json(o.config);
    const cli::SchemaValidator validator(cli::read_json(o.schema));
    validator.validate(doc);
    if (o.seed) doc["seed"] = *o.seed;
    if (o.ensemble) doc["solver"]["ensemble"] = *o.ensemble;
    validator.validate(doc);
    return cli::parse_config(doc);
}

int report(const Options& o, int code, const std::string& kind, const std::string& what) {
    const nlohmann::json err = {{"status", "error"}, {"exit_code", code}, {"kind", kind}, {"message", what}};
    std::cerr << err.dump() << '\n';
    std::error_code ec;
    if (fs::is_directory(o.out, ec)) {
        std::ofstream f(fs::path(o.out) / "error.json");
        if (f) f << err.dump(2) << '\n';
    }
    return code;
}

int run(const std::string& sub, const Options& o) {
    const auto t0 = std::chrono::steady_clock::now();
    cli::Run r(load(o), o.out, sub, [&](const std::string& line) {
        if (!o.quiet) std::cerr << line << '\n';
    });
    nlohmann::json summary = {{"status", "ok"}, {"subcommand", sub}, {"run_hash", r.hash}};
    if (sub == "simulate") {
        const auto mc = cli::run_simulate(r);
        summary["J"] = mc.agents[0].J;
    } else if (sub == "train") {
        const auto tr = cli::run_train(r);
        summary["members"] = tr.members.size();
    } else if (sub == "infer") {
        const auto inf = cli::run_infer(r, o.checkpoints.empty() ? fs::path(o.out) / "ckpt" : fs::path(o.checkpoints));
        summary["value"] = inf.value;
    } else if (sub == "validate") {
        if (r.cfg.validate.is_null() && r.cfg.sensitivity.is_null())
            throw cli::SchemaError("config has neither a validate nor a sensitivity section");
        bool pass = true;
        if (!r.cfg.validate.is_null())
            for (const auto& ch : cli::run_validate_values(r).checks) {
                summary["checks"].push_back({{"quantity", ch.quantity}, {"rel_err_pct", ch.rel_err_pct}, {"pass", ch.pass}});
                pass = pass && ch.pass;
            }
        if (!r.cfg.sensitivity.is_null())
            for (const auto& s : cli::run_sensitivity(r)) {
                summary["sensitivity"].push_back({{"parameter", s.parameter}, {"agreeing", s.agreeing}, {"probes", s.probes.size()}});
                pass = pass && s.agreeing + 1 >= s.probes.size();
            }
        summary["pass"] = pass;
    } else if (sub == "frontier") {
        if (r.cfg.frontier.is_null()) throw cli::SchemaError("config has no frontier section");
        const auto f = cli::run_frontier(r);
        summary["points"] = f.points.size();
        summary["fit_degenerate"] = f.fit.degenerate;
    } else if (sub == "sharpe") {
        const auto rep = cli::run_sharpe(r);
        summary["seller_mean"] = rep.seller_mean ? nlohmann::json(*rep.seller_mean) : nlohmann::json();
        summary["buyer_mean"] = rep.buyer_mean ? nlohmann::json(*rep.buyer_mean) : nlohmann::json();
    } else if (sub == "oracle") {
        const auto rep = cli::run_oracle(r);
        summary["tree_agrees"] = rep.tree_agrees;
        summary["oracle_value"] = rep.oracle.value;
    }
    r.write_manifest(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::cout << summary.dump() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent optimal execution solver: training, inference and evaluation"};
    app.require_subcommand(1, 1);
    Options o;
    const std::pair<const char*, const char*> subs[] = {
        {"simulate", "Monte Carlo of the hold strategy under the configured market"},
        {"train", "Train the ensemble and write checkpoints to <out>/ckpt"},
        {"infer", "Load checkpoints, run bagged inference, write controls, values and plots"},
        {"frontier", "Solve across the configured risk aversions and fit the efficient frontier"},
        {"sharpe", "Solve, simulate fresh paths and report Sharpe ratios per agent and cohort"},
        {"validate", "Compare against the configured reference values and run sensitivity sweeps"},
        {"oracle", "Check the backward recursion and the solver against exhaustive enumeration"},
    };
    for (const auto& [name, help] : subs) {
        auto* sc = app.add_subcommand(name, help);
        sc->add_option("--config", o.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
        sc->add_option("--out", o.out, "Output directory")->capture_default_str();
        sc->add_option("--seed", o.seed, "Override the configured training seed");
        sc->add_option("--ensemble", o.ensemble, "Override the ensemble size")->check(CLI::PositiveNumber);
        sc->add_option("--schema", o.schema, "JSON schema used to validate the configuration")->capture_default_str();
        sc->add_flag("--quiet", o.quiet, "Suppress progress lines on stderr");
        if (std::string(name) == "infer")
            sc->add_option("--checkpoints", o.checkpoints, "Checkpoint directory (default <out>/ckpt)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        return run(sub, o);
    } catch (const cli::SchemaError& e) {
        return report(o, 2, "schema", e.what());
    } catch (const market::SpecError& e) {
        return report(o, 2, "schema", e.what());
    } catch (const ag::ConfigError& e) {
        return report(o, 2, "schema", e.what());
    } catch (const solver::DivergenceError& e) {
        return report(o, 3, "divergence", e.what());
    } catch (const cli::IoError& e) {
        return report(o, 4, "io", e.what());
    } catch (const net::CheckpointError& e) {
        return report(o, 4, "io", e.what());
    } catch (const fs::filesystem_error& e) {
        return report(o, 4, "io", e.what());
    } catch (const std::exception& e) {
        return report(o, 1, "internal", e.what());
    }
}
