#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tcx/autograd/array.hpp"

namespace tcx::eval {

struct FrontierPoint {
    double gain = 0.0;  // E[X(T)] in currency
    double std = 0.0;   // standard deviation of X(T)
    double gamma = 0.0;
};

/// Least-squares polynomial gain = Σ_j coef[j] std^j.
struct PolyFit {
    std::vector<double> coef;
    bool degenerate = false;  // design matrix rank-deficient (e.g. repeated points)

    [[nodiscard]] double operator()(double x) const {
        double y = 0.0;
        for (std::size_t j = coef.size(); j-- > 0;) y = y * x + coef[j];
        return y;
    }
};

/// Fits on standardized abscissae for conditioning and maps the
/// coefficients back to raw units.
inline PolyFit polyfit(const std::vector<double>& x, const std::vector<double>& y, std::size_t degree) {
    if (x.size() != y.size()) throw ag::DimensionError("polyfit: x and y differ in length");
    if (x.size() < degree + 1)
        throw ag::ConfigError("polyfit: " + std::to_string(x.size()) + " points cannot fit degree " +
                              std::to_string(degree));
    const auto n = static_cast<Eigen::Index>(x.size());
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(x.size());
    double sd = 0.0;
    for (double v : x) sd = std::max(sd, std::abs(v - mu));
    PolyFit fit;
    fit.coef.assign(degree + 1, 0.0);
    if (sd == 0.0) {
        fit.degenerate = true;
        double m = 0.0;
        for (double v : y) m += v;
        fit.coef[0] = m / static_cast<double>(y.size());
        return fit;
    }
    Eigen::MatrixXd V(n, static_cast<Eigen::Index>(degree + 1));
    Eigen::VectorXd Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = (x[static_cast<std::size_t>(i)] - mu) / sd;
        double p = 1.0;
        for (std::size_t j = 0; j <= degree; ++j, p *= z) V(i, static_cast<Eigen::Index>(j)) = p;
        Y(i) = y[static_cast<std::size_t>(i)];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
    qr.setThreshold(1e-10);
    fit.degenerate = qr.rank() < static_cast<Eigen::Index>(degree + 1);
    const Eigen::VectorXd c = qr.solve(Y);
    // expand Σ c_j ((x - mu)/sd)^j into powers of x
    std::vector<double> binom(degree + 1, 1.0);
    for (std::size_t j = 0; j <= degree; ++j) {
        // binomial coefficients of row j
        std::vector<double> row(j + 1, 1.0);
        for (std::size_t q = 1; q < j; ++q) row[q] = binom[q - 1] + binom[q];
        const double scale = c(static_cast<Eigen::Index>(j)) / std::pow(sd, static_cast<double>(j));
        for (std::size_t q = 0; q <= j; ++q)
            fit.coef[q] += scale * row[q] * std::pow(-mu, static_cast<double>(j - q));
        binom = row;
        binom.resize(degree + 1, 1.0);
    }
    return fit;
}

struct Frontier {
    std::vector<FrontierPoint> points;
    PolyFit fit;  // degree 4, gain as a function of std
};

/// One solve per γ, then a degree-4 fit of gain against std.
inline Frontier efficient_frontier(const std::vector<double>& gammas,
                                   const std::function<FrontierPoint(double)>& solve_and_evaluate) {
    if (gammas.size() < 5) throw ag::ConfigError("efficient_frontier: need at least 5 risk-aversion values");
    Frontier f;
    for (double g : gammas) f.points.push_back(solve_and_evaluate(g));
    std::vector<double> x, y;
    for (const auto& p : f.points) x.push_back(p.std), y.push_back(p.gain);
    f.fit = polyfit(x, y, 4);
    return f;
}

}  // namespace tcx::eval
