#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "tcx/cli/schema.hpp"
#include "tcx/market/spec.hpp"
#include "tcx/solver/engine.hpp"

namespace tcx::cli {

/// File could not be read or written.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A validated experiment configuration.
struct RunConfig {
    nlohmann::json raw;  // the document as loaded, before overrides
    std::string experiment;
    std::uint64_t seed = 1;
    std::vector<std::string> assumptions;
    market::MarketSpec market;
    solver::SolverConfig solver;
    std::size_t eval_M = 10000;
    std::uint64_t eval_seed = 0;
    nlohmann::json validate, frontier, sensitivity, oracle;  // optional sections, null when absent
};

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::json read_json(const std::string& path) {
    const auto text = read_text(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

namespace detail {

inline std::vector<double> widen(const nlohmann::json& v, std::size_t n, const std::string& name) {
    if (v.is_number()) return std::vector<double>(n, v.get<double>());
    auto out = v.get<std::vector<double>>();
    if (out.size() != n)
        throw SchemaError("market." + name + ": expected " + std::to_string(n) + " entries, got " +
                          std::to_string(out.size()));
    return out;
}

inline std::vector<double> field(const nlohmann::json& m, const char* name, std::size_t n, double fallback) {
    return m.contains(name) ? widen(m[name], n, name) : std::vector<double>(n, fallback);
}

}  // namespace detail

inline market::MarketSpec parse_market(const nlohmann::json& m) {
    market::MarketSpec s;
    s.d = m.at("d");
    s.K = m.at("K");
    const std::size_t d = s.d, K = s.K;
    s.mu = detail::widen(m.at("mu"), d, "mu");
    s.r = m.at("r");
    s.sigma = detail::widen(m.at("sigma"), d, "sigma");
    s.s0 = detail::widen(m.at("s0"), d, "s0");
    s.kappa_s = detail::field(m, "kappa_s", d, 0.0);
    s.kappa_p = detail::field(m, "kappa_p", d * K, 0.0);
    s.kappa_tau = detail::field(m, "kappa_tau", d * K, 0.0);
    s.alpha0 = detail::widen(m.at("alpha0"), d * K, "alpha0");
    s.beta = detail::field(m, "beta", K, 1.0);
    s.gamma = detail::widen(m.at("gamma"), K, "gamma");
    s.b0 = detail::field(m, "b0", K, 0.0);
    s.phi = m.value("phi", 0.0);
    s.T = m.at("T");
    s.drift_mode = m.value("drift", std::string("excess")) == "total" ? market::DriftMode::Total
                                                                      : market::DriftMode::Excess;
    s.rho = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    if (m.contains("rho")) {
        const auto rows = m["rho"].get<std::vector<std::vector<double>>>();
        if (rows.size() != d) throw SchemaError("market.rho: expected a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
        for (std::size_t i = 0; i < d; ++i) {
            if (rows[i].size() != d) throw SchemaError("market.rho: ragged row " + std::to_string(i));
            for (std::size_t j = 0; j < d; ++j) s.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    s.validate();
    return s;
}

/// Builds the typed configuration; `doc` must already satisfy the schema.
inline RunConfig parse_config(const nlohmann::json& doc) {
    RunConfig c;
    c.raw = doc;
    c.experiment = doc.at("experiment");
    c.seed = doc.at("seed");
    c.assumptions = doc.value("assumptions", std::vector<std::string>{});
    try {
        c.market = parse_market(doc.at("market"));
    } catch (const market::SpecError& e) {
        throw SchemaError(e.what());
    } catch (const market::MatrixError& e) {
        throw SchemaError(e.what());
    }
    const auto& sv = doc.at("solver");
    auto& sc = c.solver;
    sc.N = sv.at("N");
    sc.M = sv.at("M");
    sc.max_epochs = sv.value("max_epochs", sc.max_epochs);
    sc.loss_threshold = sv.value("loss_threshold", sc.loss_threshold);
    sc.lr = sv.value("lr", sc.lr);
    sc.ensemble = sv.value("ensemble", sc.ensemble);
    sc.use_net = sv.value("use_net", sc.use_net);
    sc.net_paths = sv.value("net_paths", std::min(sc.net_paths, sc.M));
    const std::string decision = sv.value("decision", std::string("carried"));
    sc.decision = decision == "approx" ? solver::Decision::Approx
                : decision == "dual"   ? solver::Decision::Dual
                                       : solver::Decision::Carried;
    sc.psi_tol = sv.value("psi_tol", sc.psi_tol);
    sc.antithetic = sv.value("antithetic", sc.antithetic);
    sc.infer_sweeps = sv.value("infer_sweeps", sc.infer_sweeps);
    sc.heads = sv.value("heads", sc.heads);
    sc.c_base = sv.value("c_base", sc.c_base);
    sc.kernel = sv.value("kernel", sc.kernel);
    sc.groups = sv.value("groups", sc.groups);
    sc.seed = c.seed;
    const auto& grids = doc.at("grid");
    if (grids.size() != 1 && grids.size() != c.market.K)
        throw SchemaError("grid: give one grid or one per agent (" + std::to_string(c.market.K) + ")");
    try {
        for (std::size_t k = 0; k < c.market.K; ++k) {
            const auto& g = grids[grids.size() == 1 ? 0 : k];
            sc.grids.push_back(market::ControlGrid::uniform(g.at("lo"), g.at("hi"), g.at("C"), c.market.T));
        }
        sc.validate(c.market);
        if (sc.use_net) sc.net_config(c.market.d, 0).validate();
    } catch (const market::SpecError& e) {
        throw SchemaError(e.what());
    } catch (const ag::ConfigError& e) {
        throw SchemaError(e.what());
    }
    if (doc.contains("eval")) {
        c.eval_M = doc["eval"].value("M", c.eval_M);
        c.eval_seed = doc["eval"].value("seed", std::uint64_t{0});
    }
    if (c.eval_seed == 0) c.eval_seed = c.seed + 1000003;
    if (c.eval_seed >= c.seed && c.eval_seed < c.seed + sc.ensemble)
        throw SchemaError("eval.seed overlaps the training seeds");
    const nlohmann::json none;
    c.validate = doc.value("validate", none);
    c.frontier = doc.value("frontier", none);
    c.sensitivity = doc.value("sensitivity", none);
    c.oracle = doc.value("oracle", none);
    return c;
}

inline RunConfig load_config(const std::string& path, const std::string& schema_path) {
    const auto doc = read_json(path);
    SchemaValidator(read_json(schema_path)).validate(doc);
    return parse_config(doc);
}

}  // namespace tcx::cli
