#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcx::eval {

struct SharpeReport {
    std::vector<std::optional<double>> sr;  // per agent; empty when the return variance is zero
    std::vector<std::string> cohort;        // "seller" or "buyer"
    std::optional<double> seller_mean, buyer_mean;
};

/// SR_k = (E[R_k] - E[R_0,k]) / σ(R_k) with R_k = (X_k(T) - X_k(0)) / X_k(0) and
/// R_0,k = (hold_k(T) - X_k(0)) / X_k(0). The division is by the signed initial
/// wealth, so for a short book (X_k(0) < 0) ending below the hold benchmark
/// scores positive. Agents whose initial holdings sum to a positive number are
/// sellers, the rest buyers.
inline SharpeReport sharpe(const std::vector<std::vector<double>>& XT, const std::vector<std::vector<double>>& hold,
                           const std::vector<double>& X0, const std::vector<double>& net_holdings) {
    const std::size_t K = XT.size();
    if (hold.size() != K || X0.size() != K || net_holdings.size() != K)
        throw std::invalid_argument("sharpe: per-agent inputs differ in length");
    SharpeReport rep;
    double ss = 0.0, sb = 0.0;
    std::size_t ns = 0, nb = 0;
    for (std::size_t k = 0; k < K; ++k) {
        if (X0[k] == 0.0) throw std::domain_error("sharpe: zero initial wealth");
        const std::size_t M = XT[k].size();
        if (M < 2 || hold[k].size() != M) throw std::invalid_argument("sharpe: need matching samples");
        const double den = X0[k];
        double mr = 0.0, m0 = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            mr += (XT[k][m] - X0[k]) / den;
            m0 += (hold[k][m] - X0[k]) / den;
        }
        mr /= static_cast<double>(M);
        m0 /= static_cast<double>(M);
        double var = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            const double e = (XT[k][m] - X0[k]) / den - mr;
            var += e * e;
        }
        var /= static_cast<double>(M - 1);
        const bool seller = net_holdings[k] > 0.0;
        rep.cohort.push_back(seller ? "seller" : "buyer");
        if (var > 0.0) {
            rep.sr.emplace_back((mr - m0) / std::sqrt(var));
            (seller ? ss : sb) += *rep.sr.back();
            ++(seller ? ns : nb);
        } else {
            rep.sr.emplace_back(std::nullopt);
        }
    }
    if (ns) rep.seller_mean = ss / static_cast<double>(ns);
    if (nb) rep.buyer_mean = sb / static_cast<double>(nb);
    return rep;
}

}  // namespace tcx::eval
