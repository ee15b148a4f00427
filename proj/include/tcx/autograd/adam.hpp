#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tcx/autograd/array.hpp"

namespace tcx::ag {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First and second moment estimates for a list of parameter arrays.
struct AdamState {
    std::vector<Array> m;
    std::vector<Array> v;
    std::uint64_t step = 0;
};

/// One bias-corrected Adam update in place. Throws NumericError on a non-finite
/// gradient before touching any parameter.
inline void adam_step(std::vector<Array*>& params, const std::vector<Array>& grads, AdamState& state,
                      const AdamConfig& cfg = {}) {
    if (params.size() != grads.size()) throw DimensionError("adam_step: parameter/gradient count mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (grads[i].shape() != params[i]->shape())
            throw DimensionError("adam_step: gradient shape " + shape_str(grads[i].shape()) +
                                 " for parameter " + shape_str(params[i]->shape()));
        if (!grads[i].all_finite()) throw NumericError("adam_step: non-finite gradient");
    }
    if (state.m.empty()) {
        for (auto* p : params) {
            state.m.emplace_back(p->shape());
            state.v.emplace_back(p->shape());
        }
    }
    if (state.m.size() != params.size()) throw DimensionError("adam_step: state does not match parameters");
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Array& p = *params[i];
        Array& m = state.m[i];
        Array& v = state.v[i];
        const Array& g = grads[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            p[j] -= cfg.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.eps);
        }
    }
}

}  // namespace tcx::ag
