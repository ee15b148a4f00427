#pragma once

#include <algorithm>
#include <vector>

#include "tcx/autograd/array.hpp"

namespace tcx::net {

/// Normalization constants for the input channels.
struct FeatureScales {
    std::vector<double> s0;  // [d]
    double x_ref = 1.0;      // wealth scale for b and α·s0
    double u_scale = 1.0;    // value scale for U^{n+1}
    double T = 1.0;
    std::size_t M = 1;       // path count of the full batch
};

/// Channel count for d assets: S (d), b, α (d), v, U^{n+1}, t, m, c, asset index.
constexpr std::size_t feature_count(std::size_t d) { return 2 * d + 7; }

/// One agent's pre-decision state on B paths, with the candidate rates of
/// asset i spread over the C columns.
struct StepInputs {
    std::size_t d = 1, C = 1, B = 1;
    const double* S = nullptr;       // [B][d]
    const double* b = nullptr;       // [B]
    const double* alpha = nullptr;   // [B][d]
    const double* v = nullptr;       // [C]
    const double* u_next = nullptr;  // [B][C]
    const std::size_t* path = nullptr;  // [B] row indices into the full batch
    double t = 0.0;
    std::size_t asset = 0;
};

inline ag::Array assemble_inputs(const StepInputs& in, const FeatureScales& sc) {
    const std::size_t d = in.d, F = feature_count(d);
    ag::Array X({in.B, in.C, F});
    const double mden = static_cast<double>(std::max<std::size_t>(sc.M, 2) - 1);
    const double cden = static_cast<double>(std::max<std::size_t>(in.C, 2) - 1);
    const double iden = static_cast<double>(std::max<std::size_t>(d, 2) - 1);
    for (std::size_t p = 0; p < in.B; ++p)
        for (std::size_t c = 0; c < in.C; ++c) {
            double* x = X.data() + (p * in.C + c) * F;
            for (std::size_t j = 0; j < d; ++j) {
                x[j] = in.S[p * d + j] / sc.s0[j];
                x[d + 1 + j] = in.alpha[p * d + j] * sc.s0[j] / sc.x_ref;
            }
            x[d] = in.b[p] / sc.x_ref;
            x[2 * d + 1] = in.v[c] * sc.T * sc.s0[in.asset] / sc.x_ref;
            x[2 * d + 2] = in.u_next[p * in.C + c] / sc.u_scale;
            x[2 * d + 3] = in.t / sc.T;
            x[2 * d + 4] = static_cast<double>(in.path[p]) / mden;
            x[2 * d + 5] = static_cast<double>(c) / cden;
            x[2 * d + 6] = static_cast<double>(in.asset) / iden;
        }
    return X;
}

}  // namespace tcx::net
